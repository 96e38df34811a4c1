//! C ABI over the phoneme-coverage and scoring helpers of `emoscript`.
//!
//! Every fallible call returns an `EMO_*` status code and writes its result through an
//! out-pointer. On failure, `emo_last_error` describes the most recent error on the
//! calling thread. Strings returned by the library must be released with
//! `emo_string_free`; corpus handles with `emo_corpus_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use emoscript::phoneme::{
    coverage_gaps, extended_entropy, kana_to_phonemes, EntropyConfig, KanaError, NGramStats, Phoneme,
    PhonemeSequence,
};
use emoscript::scoring::{aggregate_wrime_intensity, normalize};

pub const EMO_OK: i32 = 0;
pub const EMO_NULL_POINTER: i32 = 1;
pub const EMO_INVALID_UTF8: i32 = 2;
pub const EMO_KANJI: i32 = 3;
pub const EMO_UNKNOWN_SYMBOL: i32 = 4;
pub const EMO_INVALID_ARGUMENT: i32 = 5;
pub const EMO_PANIC: i32 = 99;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(i32, String);

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EMO_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            EMO_PANIC
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(EMO_NULL_POINTER, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(EMO_INVALID_UTF8, format!("{what}: {e}")))
}

fn kana_fail(e: KanaError) -> Fail {
    let code = match e {
        KanaError::Kanji { .. } => EMO_KANJI,
        _ => EMO_UNKNOWN_SYMBOL,
    };
    Fail(code, e.to_string())
}

fn out_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|e| Fail(EMO_INVALID_ARGUMENT, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Opaque phoneme corpus accumulating n-gram counts up to a fixed order.
pub struct EmoCorpus {
    stats: NGramStats,
    scripts: usize,
}

/// Message for the last failed call on this thread, or NULL. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn emo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn emo_phoneme_inventory_size() -> u32 {
    Phoneme::ALL.len() as u32
}

/// New empty corpus counting n-grams of order 1..=max_order. NULL if max_order is 0.
#[no_mangle]
pub extern "C" fn emo_corpus_new(max_order: u32) -> *mut EmoCorpus {
    clear_error();
    if max_order == 0 {
        set_error("max_order must be at least 1");
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(EmoCorpus {
        stats: NGramStats::new(max_order as usize),
        scripts: 0,
    }))
}

/// # Safety
/// `corpus` must come from `emo_corpus_new` and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn emo_corpus_free(corpus: *mut EmoCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Adds one kana script. Kanji are rejected with `EMO_KANJI`; the corpus is unchanged
/// on failure.
///
/// # Safety
/// `corpus` must be a live handle and `kana` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn emo_corpus_add_kana(corpus: *mut EmoCorpus, kana: *const c_char) -> i32 {
    guard(|| {
        let c = corpus.as_mut().ok_or_else(|| null("corpus"))?;
        let seq = kana_to_phonemes(text(kana, "kana")?).map_err(kana_fail)?;
        c.stats.add_sequence(&seq.phones);
        c.scripts += 1;
        Ok(())
    })
}

/// Adds one script given as space-separated phoneme symbols (e.g. "ky o u").
///
/// # Safety
/// `corpus` must be a live handle and `symbols` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn emo_corpus_add_phonemes(corpus: *mut EmoCorpus, symbols: *const c_char) -> i32 {
    guard(|| {
        let c = corpus.as_mut().ok_or_else(|| null("corpus"))?;
        let seq = PhonemeSequence::parse(text(symbols, "symbols")?)
            .map_err(|e| Fail(EMO_UNKNOWN_SYMBOL, e.to_string()))?;
        c.stats.add_sequence(&seq.phones);
        c.scripts += 1;
        Ok(())
    })
}

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emo_corpus_len(corpus: *const EmoCorpus, out: *mut usize) -> i32 {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = c.scripts;
        Ok(())
    })
}

/// Extended entropy. `weights` may be NULL for uniform weights over every order;
/// otherwise it holds `n_weights` values summing to 1, with `n_weights` no larger
/// than the corpus order.
///
/// # Safety
/// `corpus` must be a live handle, `weights` NULL or readable for `n_weights` values,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn emo_corpus_entropy(
    corpus: *const EmoCorpus,
    weights: *const f64,
    n_weights: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = if weights.is_null() {
            EntropyConfig::uniform(c.stats.max_order())
        } else {
            if n_weights > c.stats.max_order() {
                return Err(Fail(
                    EMO_INVALID_ARGUMENT,
                    format!("{n_weights} weights for a corpus of order {}", c.stats.max_order()),
                ));
            }
            EntropyConfig::new(std::slice::from_raw_parts(weights, n_weights).to_vec())
        }
        .map_err(|e| Fail(EMO_INVALID_ARGUMENT, e.to_string()))?;
        *out = extended_entropy(&c.stats, &cfg);
        Ok(())
    })
}

/// Number of distinct m-grams (N_m).
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emo_corpus_arrangements(corpus: *const EmoCorpus, m: u32, out: *mut u64) -> i32 {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if m == 0 || m as usize > c.stats.max_order() {
            return Err(Fail(EMO_INVALID_ARGUMENT, format!("order {m} outside 1..={}", c.stats.max_order())));
        }
        *out = c.stats.arrangements(m as usize) as u64;
        Ok(())
    })
}

/// Space-separated phonemes of the inventory that never occur. Free with `emo_string_free`.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emo_corpus_gaps(corpus: *const EmoCorpus, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let gaps: Vec<&str> = coverage_gaps(&c.stats, &Phoneme::inventory()).into_iter().map(Phoneme::as_str).collect();
        out_string(out, gaps.join(" "))
    })
}

/// Kana to space-separated phoneme symbols. Free the result with `emo_string_free`.
///
/// # Safety
/// `kana` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emo_phonemize(kana: *const c_char, out: *mut *mut c_char) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let seq = kana_to_phonemes(text(kana, "kana")?).map_err(kana_fail)?;
        out_string(out, seq.to_string())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn emo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// WRIME intensity aggregate: (writer + mean(readers)) / 2, all intensities in 0..=3.
///
/// # Safety
/// `readers` must be readable for `n_readers` bytes; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn emo_wrime_aggregate(writer: u8, readers: *const u8, n_readers: usize, out: *mut f64) -> i32 {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if readers.is_null() && n_readers > 0 {
            return Err(null("readers"));
        }
        let r = if n_readers == 0 { &[][..] } else { std::slice::from_raw_parts(readers, n_readers) };
        *out = aggregate_wrime_intensity(writer, r).map_err(|e| Fail(EMO_INVALID_ARGUMENT, e.to_string()))?;
        Ok(())
    })
}

/// Min-max normalization of `n` values into `out` (may alias `values`); a constant
/// input maps to 0.5.
///
/// # Safety
/// `values` must be readable and `out` writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn emo_normalize(values: *const f64, n: usize, out: *mut f64) -> i32 {
    guard(|| {
        if n == 0 {
            return Ok(());
        }
        if values.is_null() || out.is_null() {
            return Err(null("values/out"));
        }
        let v = std::slice::from_raw_parts(values, n).to_vec();
        let norm = normalize(&v).map_err(|e| Fail(EMO_INVALID_ARGUMENT, e.to_string()))?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&norm);
        Ok(())
    })
}
