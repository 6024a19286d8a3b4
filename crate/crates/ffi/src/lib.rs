//! C ABI for lambdav. Programs are opaque handles; every call returns an
//! [`LvError`] code and writes results through out-pointers. Strings
//! returned to the caller must be released with [`lv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lambdav::assign::check_assign;
use lambdav::formula::{parse_form, FormEnv};
use lambdav::pretty::{render, rendered_change_points};
use lambdav::stream::stream_eval;
use lambdav::{surface, Error, Expr, SymbolTable};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LvError {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Formula = 4,
    NotFound = 5,
    Internal = 6,
}

/// A compiled program together with its symbol table.
pub struct LvProgram {
    expr: Expr,
    table: SymbolTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(code: LvError, msg: impl Into<String>) -> LvError {
    set_error(msg.into());
    code
}

fn guard(f: impl FnOnce() -> LvError) -> LvError {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(LvError::Internal, "internal panic"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, LvError> {
    if s.is_null() {
        return Err(fail(LvError::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(LvError::InvalidUtf8, "argument is not valid UTF-8"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> LvError {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            LvError::Ok
        }
        Err(_) => fail(LvError::Internal, "result contains a NUL byte"),
    }
}

/// Message describing the most recent failure on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and desugars `source`. `sym_table` may be NULL for the discrete
/// table, otherwise it holds lines of the form `a b -> c`.
///
/// # Safety
/// `source` and `sym_table` must be NULL or valid NUL-terminated strings;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lv_program_parse(
    source: *const c_char,
    sym_table: *const c_char,
    out: *mut *mut LvProgram,
) -> LvError {
    guard(|| {
        if out.is_null() {
            return fail(LvError::NullPointer, "null out pointer");
        }
        let src = match read_str(source) {
            Ok(s) => s,
            Err(code) => return code,
        };
        let table = if sym_table.is_null() {
            SymbolTable::discrete()
        } else {
            let text = match read_str(sym_table) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match SymbolTable::parse(text).and_then(|t| t.check_laws().map(|_| t)) {
                Ok(t) => t,
                Err(e) => return fail(LvError::Parse, e.to_string()),
            }
        };
        match surface::compile(src) {
            Ok(expr) => {
                *out = Box::into_raw(Box::new(LvProgram { expr, table }));
                LvError::Ok
            }
            Err(e) => fail(LvError::Parse, e.to_string()),
        }
    })
}

/// Releases a program. NULL is ignored.
///
/// # Safety
/// `p` must be NULL or a handle from [`lv_program_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lv_program_free(p: *mut LvProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Change-point observations up to `max_fuel` as JSON lines, each an object
/// with fields `fuel` and `result`.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lv_observe(p: *const LvProgram, max_fuel: u32, out: *mut *mut c_char) -> LvError {
    guard(|| {
        let Some(prog) = p.as_ref() else {
            return fail(LvError::NullPointer, "null program");
        };
        if out.is_null() {
            return fail(LvError::NullPointer, "null out pointer");
        }
        let mut text = String::new();
        for (o, shown) in rendered_change_points(&prog.expr, max_fuel, &prog.table) {
            let line = serde_json::json!({"fuel": o.fuel, "result": shown});
            text.push_str(&line.to_string());
            text.push('\n');
        }
        write_string(out, text)
    })
}

/// The rendered result of evaluating the program with `fuel`.
///
/// # Safety
/// `p` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lv_stream_eval(p: *const LvProgram, fuel: u32, out: *mut *mut c_char) -> LvError {
    guard(|| {
        let Some(prog) = p.as_ref() else {
            return fail(LvError::NullPointer, "null program");
        };
        if out.is_null() {
            return fail(LvError::NullPointer, "null out pointer");
        }
        let r = stream_eval(&prog.expr, fuel, &prog.table);
        write_string(out, render(&r, fuel, &prog.table))
    })
}

/// Searches for a derivation of `formula` with formulae of height at most
/// `depth`. Returns `Ok` if one was found and `NotFound` otherwise.
///
/// # Safety
/// `p` must be a live handle and `formula` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lv_check(p: *const LvProgram, formula: *const c_char, depth: u32) -> LvError {
    guard(|| {
        let Some(prog) = p.as_ref() else {
            return fail(LvError::NullPointer, "null program");
        };
        let text = match read_str(formula) {
            Ok(s) => s,
            Err(code) => return code,
        };
        let phi = match parse_form(text) {
            Ok(f) => f,
            Err(Error::Formula(m)) => return fail(LvError::Formula, m),
            Err(e) => return fail(LvError::Formula, e.to_string()),
        };
        match check_assign(&FormEnv::new(), &prog.expr, &phi, depth as usize, &prog.table) {
            Some(_) => LvError::Ok,
            None => fail(LvError::NotFound, format!("no derivation of {phi} within depth {depth}")),
        }
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> *mut LvProgram {
        let src = CString::new(src).unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(unsafe { lv_program_parse(src.as_ptr(), ptr::null(), &mut p) }, LvError::Ok);
        p
    }

    fn take(s: *mut c_char) -> String {
        let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
        unsafe { lv_string_free(s) };
        out
    }

    #[test]
    fn observe_and_eval() {
        let p = parse("def fromN n = (n :: fromN (n + 1)) \\/ botv\nfromN 0");
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { lv_observe(p, 8, &mut s) }, LvError::Ok);
        let lines: Vec<String> = take(s).lines().map(str::to_string).collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], r#"{"fuel":7,"result":"0 :: 1 :: botv"}"#);
        assert_eq!(unsafe { lv_stream_eval(p, 5, &mut s) }, LvError::Ok);
        assert_eq!(take(s), "0 :: botv");
        unsafe { lv_program_free(p) };
    }

    #[test]
    fn check_codes() {
        let p = parse("\\x. x");
        let ok = CString::new("\\/ ['a -> 'a]").unwrap();
        let no = CString::new("'a").unwrap();
        let bad = CString::new("{'a").unwrap();
        unsafe {
            assert_eq!(lv_check(p, ok.as_ptr(), 3), LvError::Ok);
            assert_eq!(lv_check(p, no.as_ptr(), 3), LvError::NotFound);
            assert_eq!(lv_check(p, bad.as_ptr(), 3), LvError::Formula);
            assert!(!lv_last_error().is_null());
            lv_program_free(p);
        }
    }

    #[test]
    fn errors() {
        let src = CString::new("let = in").unwrap();
        let mut p = ptr::null_mut();
        unsafe {
            assert_eq!(lv_program_parse(src.as_ptr(), ptr::null(), &mut p), LvError::Parse);
            assert!(p.is_null());
            let msg = CStr::from_ptr(lv_last_error()).to_str().unwrap();
            assert!(msg.contains("1:5"), "{msg}");
            assert_eq!(lv_program_parse(ptr::null(), ptr::null(), &mut p), LvError::NullPointer);
            assert_eq!(lv_stream_eval(ptr::null(), 1, &mut ptr::null_mut()), LvError::NullPointer);
            lv_program_free(ptr::null_mut());
            lv_string_free(ptr::null_mut());
        }
    }
}
