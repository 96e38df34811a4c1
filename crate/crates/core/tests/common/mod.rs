#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emoscript::model::{Emotion, NvPhrase, Polarity, Script, SeedWord, Session};
use emoscript::stub::{chat_completion_body, StubResponse, StubServer};

pub const KEY_VAR: &str = "EMOSCRIPT_TEST_API_KEY";

const MORA: [&str; 30] = [
    "か", "き", "く", "け", "こ", "さ", "し", "す", "せ", "そ", "た", "ち", "つ", "て", "と", "な", "に", "ぬ", "ね",
    "の", "ま", "み", "む", "め", "も", "ら", "り", "る", "れ", "ろ",
];

/// Four-mora kana words; distinct for `i < 27000`.
pub fn kana_word(i: usize) -> String {
    format!("{}{}{}{}", MORA[i % 30], MORA[(i / 30) % 30], MORA[(i / 900) % 30], MORA[(i * 7 + 11) % 30])
}

/// `surface<TAB>polarity` lines, `n` words per polarity, all kana.
pub fn kana_dictionary(n: usize) -> String {
    let mut out = String::new();
    for (k, p) in ["p", "n", "e"].iter().enumerate() {
        for i in 0..n {
            out.push_str(&format!("{}\t{p}\n", kana_word(k * n + i)));
        }
    }
    out
}

fn emotion_word(e: Emotion) -> &'static str {
    match e {
        Emotion::Anger => "おこった",
        Emotion::Disgust => "いやだ",
        Emotion::Fear => "こわい",
        Emotion::Happiness => "うれしい",
        Emotion::Sadness => "かなしい",
        Emotion::Surprise => "びっくり",
    }
}

fn slot<'a>(tail: &'a str, label: &str) -> Option<&'a str> {
    tail.lines().find_map(|l| l.strip_prefix(label)).map(str::trim)
}

/// Completion text the fake model returns for `prompt`.
pub fn fake_completion(prompt: &str) -> String {
    let first = prompt.lines().next().unwrap_or("");
    let emotion = Emotion::ALL
        .into_iter()
        .find(|e| first.contains(&format!("express {}", e.as_str())))
        .unwrap_or(Emotion::Surprise);
    let tail = prompt.rsplit("# Your turn").next().unwrap_or("");
    let word = slot(tail, "Word:").unwrap_or("なにか");
    let text = match slot(tail, "Interjection:") {
        Some(p) => format!("{p}、{word}で{}。", emotion_word(emotion)),
        None => format!("{word}のことで{}。", emotion_word(emotion)),
    };
    format!("Script: {text}\nReading: {text}")
}

/// Chat-completions stub that answers every prompt deterministically.
pub fn fake_llm() -> StubServer {
    StubServer::start(|req| {
        let body = req.json().expect("json body");
        let prompt = body["messages"][0]["content"].as_str().unwrap_or_default().to_string();
        StubResponse::ok(chat_completion_body(&fake_completion(&prompt)))
    })
    .expect("stub server")
}

pub fn write_config(dir: &Path, llm_url: &str, extra: &str) -> PathBuf {
    std::fs::write(dir.join("dict.tsv"), kana_dictionary(80)).unwrap();
    let text = format!(
        "name = \"test\"\nseed = 11\n\n[paths]\ndictionary = \"dict.tsv\"\noutput_dir = \"out\"\n\n\
         [llm]\nendpoint = \"{llm_url}\"\napi_key_env = \"{KEY_VAR}\"\nconcurrency = 4\n\n{extra}"
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn emoscript(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emoscript"))
        .args(args)
        .env(KEY_VAR, "sk-test-secret")
        .output()
        .expect("run emoscript")
}

pub fn emoscript_without_key(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emoscript"))
        .args(args)
        .env_remove(KEY_VAR)
        .output()
        .expect("run emoscript")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A scored script in the given bucket with a kana reading.
pub fn scored(i: usize, emotion: Emotion, session: Session, score: f64) -> Script {
    let word = kana_word(i);
    let phrase = (session == Session::Regular).then(|| NvPhrase::new("p", "ああ", emotion));
    let text = match &phrase {
        Some(p) => format!("{}、{word}{}", p.surface, emotion_word(emotion)),
        None => format!("{word}{}", emotion_word(emotion)),
    };
    let mut s = Script::new(&text, emotion, session, SeedWord::new(word, Polarity::Neutral), phrase);
    s.emotion_score_norm = Some(score / 2.0);
    s.fluency_score_norm = Some(score / 2.0);
    s.with_combined_score(score)
}

/// `factor` candidates per unit of quota in every bucket of `quotas`.
pub fn pool_for(quotas: &[emoscript::selection::QuotaConfig], factor: usize) -> Vec<Script> {
    let mut out = Vec::new();
    let mut i = 0;
    for e in Emotion::ALL {
        for s in Session::ALL {
            let need: usize = quotas.iter().map(|q| q.quota(e, s)).sum();
            for k in 0..need * factor {
                out.push(scored(i, e, s, ((k * 37) % 101) as f64 / 50.5));
                i += 1;
            }
        }
    }
    out
}
