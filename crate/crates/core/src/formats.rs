//! Interchange file formats.
//!
//! Text files are UTF-8, tab-separated, one record per line, and start with
//! a `#fmt:<name>:<version>` header. Further lines starting with `#` are
//! metadata and are only interpreted where documented below. Floats are
//! written in shortest round-trip decimal form.
//!
//! | name          | record                                                  |
//! |---------------|---------------------------------------------------------|
//! | `embeddings`  | `utt_id speaker_id domain language v1,...,vD`           |
//! | `prototypes`  | `speaker_id domain language v1,...,vD`                  |
//! | `trials`      | `model_id test_utt_id [target\|nontarget]`              |
//! | `enroll`      | `model_id utt_id`                                       |
//! | `scores`      | `model_id test_utt_id score [target\|nontarget]`        |
//! | `lid`         | `utt_id FARSI\|ENGLISH llr`                             |
//! | `manifest`    | `pass_id batch_idx pos utt_id speaker_idx`              |
//! | `gb`, `alpha`, `calibration`, `metrics` | `key value...`                |
//!
//! A `scores` file may carry `#calibrated<TAB>tag` after the header. Each pass
//! of a `manifest` file starts with
//! `#pass<TAB>pass_id<TAB>epoch_tag<TAB>group_size<TAB>padded_groups`.
//!
//! Binary embeddings: magic `SVEB`, version `u16`, dim `u32`, count `u64`,
//! then `count * dim` little-endian `f32` values row-major, then a string
//! table with, per record, `u32` length + UTF-8 utt id, `u32` length +
//! UTF-8 speaker id, domain byte and language byte. Vectors are stored as
//! `f32`, so only values representable in `f32` round-trip exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::calibration::CalibrationModel;
use crate::error::{Error, Result};
use crate::hpm::{Batch, BatchEntry, BatchManifest};
use crate::lid::{GaussianBackend, LidDecision};
use crate::math::{Domain, Embedding, Language};
use crate::prototypes::{PrototypeMatrix, SpeakerInfo};
use crate::scores::{Label, ScoreRecord, ScoreSet, Trial, TrialKey};
use crate::snorm::LanguageOffset;

pub const VERSION: &str = "1";
pub const BINARY_MAGIC: &[u8; 4] = b"SVEB";
pub const BINARY_VERSION: u16 = 1;

fn header(name: &str) -> String {
    format!("#fmt:{name}:{VERSION}\n")
}

/// Lines of a text file after its header, with 1-based line numbers.
struct TextFile<'a> {
    file: String,
    lines: Vec<(usize, &'a str)>,
}

impl<'a> TextFile<'a> {
    fn parse(content: &'a str, file: &str, name: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate().map(|(i, l)| (i + 1, l));
        let first = lines.next().map(|(_, l)| l).unwrap_or("");
        let mut parts = first.splitn(3, ':');
        let ok = parts.next() == Some("#fmt") && parts.next() == Some(name);
        if !ok {
            return Err(Error::Parse {
                file: file.into(),
                line: 1,
                msg: format!("expected header '#fmt:{name}:{VERSION}', found '{first}'"),
            });
        }
        let version = parts.next().unwrap_or("");
        if version != VERSION {
            return Err(Error::VersionUnsupported {
                name: name.into(),
                version: version.into(),
            });
        }
        Ok(Self {
            file: file.into(),
            lines: lines.filter(|(_, l)| !l.trim().is_empty()).collect(),
        })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn records(&self) -> impl Iterator<Item = (usize, Vec<&'a str>)> + '_ {
        self.lines
            .iter()
            .filter(|(_, l)| !l.starts_with('#'))
            .map(|&(n, l)| (n, l.split('\t').collect()))
    }

    fn meta(&self, key: &str) -> Option<(usize, Vec<&'a str>)> {
        self.lines
            .iter()
            .find(|(_, l)| l.split('\t').next() == Some(key))
            .map(|&(n, l)| (n, l.split('\t').skip(1).collect()))
    }

    fn field<T: FromStr>(&self, line: usize, fields: &[&str], idx: usize, what: &str) -> Result<T> {
        let raw = fields
            .get(idx)
            .ok_or_else(|| self.err(line, format!("missing field {what}")))?;
        raw.parse()
            .map_err(|_| self.err(line, format!("bad {what} '{raw}'")))
    }

    fn arity(&self, line: usize, fields: &[&str], allowed: &[usize]) -> Result<()> {
        if allowed.contains(&fields.len()) {
            Ok(())
        } else {
            Err(self.err(
                line,
                format!("expected {allowed:?} fields, found {}", fields.len()),
            ))
        }
    }

    fn vector(&self, line: usize, raw: &str) -> Result<Vec<f64>> {
        raw.split(',')
            .map(|v| {
                let x: f64 = v
                    .parse()
                    .map_err(|_| self.err(line, format!("bad float '{v}'")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(self.err(line, "non-finite vector entry"))
                }
            })
            .collect()
    }

    /// Key-value map for the `key value...` formats.
    fn key_values(&self) -> Result<HashMap<&'a str, (usize, Vec<&'a str>)>> {
        let mut map = HashMap::new();
        for (n, fields) in self.records() {
            if map.insert(fields[0], (n, fields[1..].to_vec())).is_some() {
                return Err(self.err(n, format!("duplicate key '{}'", fields[0])));
            }
        }
        Ok(map)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn join_vec(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 10);
    for (k, x) in v.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        write!(s, "{x:?}").unwrap();
    }
    s
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) || id.starts_with('#') {
        return Err(Error::ParamInvalid(format!(
            "id '{id}' must be non-empty, whitespace-free and not start with '#'"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- embeddings

pub fn format_embeddings(embs: &[Embedding]) -> Result<String> {
    let mut out = header("embeddings");
    for e in embs {
        check_id(&e.utt_id)?;
        check_id(&e.speaker_id)?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.utt_id,
            e.speaker_id,
            e.domain,
            e.language,
            join_vec(&e.vec)
        )
        .unwrap();
    }
    Ok(out)
}

pub fn parse_embeddings(content: &str, file: &str) -> Result<Vec<Embedding>> {
    let tf = TextFile::parse(content, file, "embeddings")?;
    let mut out: Vec<Embedding> = Vec::new();
    for (n, f) in tf.records() {
        tf.arity(n, &f, &[5])?;
        let vec = tf.vector(n, f[4])?;
        if let Some(first) = out.first() {
            if first.vec.len() != vec.len() {
                return Err(tf.err(
                    n,
                    format!("dimension {} differs from {}", vec.len(), first.vec.len()),
                ));
            }
        }
        out.push(Embedding {
            utt_id: f[0].into(),
            speaker_id: f[1].into(),
            domain: tf.field(n, &f, 2, "domain")?,
            language: tf.field(n, &f, 3, "language")?,
            vec,
        });
    }
    Ok(out)
}

pub fn encode_embeddings_binary(embs: &[Embedding]) -> Result<Vec<u8>> {
    let dim = embs.first().map_or(0, |e| e.vec.len());
    let mut out = Vec::with_capacity(18 + embs.len() * (dim * 4 + 32));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(embs.len() as u64).to_le_bytes());
    for e in embs {
        if e.vec.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.vec.len(),
            });
        }
        for &x in &e.vec {
            let narrow = x as f32;
            if !narrow.is_finite() {
                return Err(Error::NonFinite(format!(
                    "embedding {} does not fit in f32",
                    e.utt_id
                )));
            }
            out.extend_from_slice(&narrow.to_le_bytes());
        }
    }
    for e in embs {
        check_id(&e.utt_id)?;
        check_id(&e.speaker_id)?;
        for s in [&e.utt_id, &e.speaker_id] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.push(e.domain.to_byte());
        out.push(e.language.to_byte());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    file: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Parse {
                file: self.file.into(),
                line: 0,
                msg: format!("truncated binary file at byte {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn string(&mut self) -> Result<String> {
        let len = u32::from_le_bytes(self.array()?) as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.bad("id is not UTF-8"))
    }

    fn bad(&self, msg: &str) -> Error {
        Error::Parse {
            file: self.file.into(),
            line: 0,
            msg: format!("{msg} (byte {})", self.pos),
        }
    }
}

pub fn decode_embeddings_binary(buf: &[u8], file: &str) -> Result<Vec<Embedding>> {
    let mut c = Cursor { buf, pos: 0, file };
    if c.take(4)? != BINARY_MAGIC {
        return Err(c.bad("missing SVEB magic"));
    }
    let version = u16::from_le_bytes(c.array()?);
    if version != BINARY_VERSION {
        return Err(Error::VersionUnsupported {
            name: "SVEB".into(),
            version: version.to_string(),
        });
    }
    let dim = u32::from_le_bytes(c.array()?) as usize;
    let count = u64::from_le_bytes(c.array()?) as usize;
    let float_bytes = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| c.bad("size overflow"))?;
    let floats = c.take(float_bytes)?;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let row = &floats[k * dim * 4..(k + 1) * dim * 4];
        let vec: Vec<f64> = row
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")) as f64)
            .collect();
        if vec.iter().any(|x| !x.is_finite()) {
            return Err(c.bad("non-finite vector entry"));
        }
        let utt_id = c.string()?;
        let speaker_id = c.string()?;
        let [d, l] = c.array()?;
        out.push(Embedding {
            utt_id,
            speaker_id,
            domain: Domain::from_byte(d).ok_or_else(|| c.bad("bad domain byte"))?,
            language: Language::from_byte(l).ok_or_else(|| c.bad("bad language byte"))?,
            vec,
        });
    }
    if c.pos != buf.len() {
        return Err(c.bad("trailing bytes"));
    }
    Ok(out)
}

/// Reads a text or binary embedding file, detected by its first bytes.
pub fn read_embeddings(path: &Path) -> Result<Vec<Embedding>> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let name = path.display().to_string();
    if bytes.starts_with(BINARY_MAGIC) {
        decode_embeddings_binary(&bytes, &name)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
            file: name.clone(),
            line: 0,
            msg: "not UTF-8".into(),
        })?;
        parse_embeddings(&text, &name)
    }
}

pub fn write_embeddings(path: &Path, embs: &[Embedding], binary: bool) -> Result<()> {
    if binary {
        write_file(path, &encode_embeddings_binary(embs)?)
    } else {
        write_file(path, format_embeddings(embs)?.as_bytes())
    }
}

// ---------------------------------------------------------------- prototypes

pub fn format_prototypes(p: &PrototypeMatrix) -> Result<String> {
    let mut out = header("prototypes");
    for (info, col) in p.speakers().iter().zip(p.columns()) {
        check_id(&info.speaker_id)?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            info.speaker_id,
            info.domain,
            info.language,
            join_vec(col)
        )
        .unwrap();
    }
    Ok(out)
}

pub fn parse_prototypes(content: &str, file: &str) -> Result<PrototypeMatrix> {
    let tf = TextFile::parse(content, file, "prototypes")?;
    let mut cols = Vec::new();
    let mut infos = Vec::new();
    for (n, f) in tf.records() {
        tf.arity(n, &f, &[4])?;
        infos.push(SpeakerInfo {
            speaker_id: f[0].into(),
            domain: tf.field(n, &f, 1, "domain")?,
            language: tf.field(n, &f, 2, "language")?,
        });
        cols.push(tf.vector(n, f[3])?);
    }
    PrototypeMatrix::new(cols, infos)
}

pub fn read_prototypes(path: &Path) -> Result<PrototypeMatrix> {
    parse_prototypes(&read_text(path)?, &path.display().to_string())
}

pub fn write_prototypes(path: &Path, p: &PrototypeMatrix) -> Result<()> {
    write_file(path, format_prototypes(p)?.as_bytes())
}

// ---------------------------------------------------------------- trials and enrollment

pub fn format_trials(trials: &[Trial]) -> Result<String> {
    let mut out = header("trials");
    for t in trials {
        check_id(&t.key.model_id)?;
        check_id(&t.key.test_id)?;
        match t.label {
            Some(l) => writeln!(out, "{}\t{}\t{l}", t.key.model_id, t.key.test_id),
            None => writeln!(out, "{}\t{}", t.key.model_id, t.key.test_id),
        }
        .unwrap();
    }
    Ok(out)
}

pub fn parse_trials(content: &str, file: &str) -> Result<Vec<Trial>> {
    let tf = TextFile::parse(content, file, "trials")?;
    tf.records()
        .map(|(n, f)| {
            tf.arity(n, &f, &[2, 3])?;
            Ok(Trial {
                key: TrialKey::new(f[0], f[1]),
                label: if f.len() == 3 {
                    Some(tf.field::<Label>(n, &f, 2, "label")?)
                } else {
                    None
                },
            })
        })
        .collect()
}

pub fn read_trials(path: &Path) -> Result<Vec<Trial>> {
    parse_trials(&read_text(path)?, &path.display().to_string())
}

pub fn write_trials(path: &Path, trials: &[Trial]) -> Result<()> {
    write_file(path, format_trials(trials)?.as_bytes())
}

/// Enrollment map as ordered `(model_id, utt_ids)` pairs.
pub fn format_enrollment(map: &[(String, Vec<String>)]) -> Result<String> {
    let mut out = header("enroll");
    for (model, utts) in map {
        check_id(model)?;
        for u in utts {
            check_id(u)?;
            writeln!(out, "{model}\t{u}").unwrap();
        }
    }
    Ok(out)
}

pub fn parse_enrollment(content: &str, file: &str) -> Result<Vec<(String, Vec<String>)>> {
    let tf = TextFile::parse(content, file, "enroll")?;
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (n, f) in tf.records() {
        tf.arity(n, &f, &[2])?;
        let k = *index.entry(f[0].to_string()).or_insert_with(|| {
            out.push((f[0].to_string(), Vec::new()));
            out.len() - 1
        });
        out[k].1.push(f[1].to_string());
    }
    Ok(out)
}

pub fn read_enrollment(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    parse_enrollment(&read_text(path)?, &path.display().to_string())
}

pub fn write_enrollment(path: &Path, map: &[(String, Vec<String>)]) -> Result<()> {
    write_file(path, format_enrollment(map)?.as_bytes())
}

// ---------------------------------------------------------------- scores

/// A score file: scores plus the calibration tag if they were calibrated.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub scores: ScoreSet,
    pub calibrated: Option<String>,
}

pub fn format_scores(file: &ScoreFile) -> Result<String> {
    let mut out = header("scores");
    if let Some(tag) = &file.calibrated {
        check_id(tag)?;
        writeln!(out, "#calibrated\t{tag}").unwrap();
    }
    for r in file.scores.records() {
        check_id(&r.key.model_id)?;
        check_id(&r.key.test_id)?;
        match r.label {
            Some(l) => writeln!(
                out,
                "{}\t{}\t{:?}\t{l}",
                r.key.model_id, r.key.test_id, r.score
            ),
            None => writeln!(out, "{}\t{}\t{:?}", r.key.model_id, r.key.test_id, r.score),
        }
        .unwrap();
    }
    Ok(out)
}

pub fn parse_scores(content: &str, file: &str) -> Result<ScoreFile> {
    let tf = TextFile::parse(content, file, "scores")?;
    let records = tf
        .records()
        .map(|(n, f)| {
            tf.arity(n, &f, &[3, 4])?;
            Ok(ScoreRecord {
                key: TrialKey::new(f[0], f[1]),
                score: tf.field(n, &f, 2, "score")?,
                label: if f.len() == 4 {
                    Some(tf.field::<Label>(n, &f, 3, "label")?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let calibrated = tf
        .meta("#calibrated")
        .and_then(|(_, v)| v.first().map(|s| s.to_string()));
    Ok(ScoreFile {
        scores: ScoreSet::new(records)?,
        calibrated,
    })
}

pub fn read_scores(path: &Path) -> Result<ScoreFile> {
    parse_scores(&read_text(path)?, &path.display().to_string())
}

pub fn write_scores(path: &Path, file: &ScoreFile) -> Result<()> {
    write_file(path, format_scores(file)?.as_bytes())
}

// ---------------------------------------------------------------- LID decisions

pub fn format_lid(decisions: &[(String, LidDecision)]) -> Result<String> {
    let mut out = header("lid");
    for (utt, d) in decisions {
        check_id(utt)?;
        if !matches!(d.language, Language::Farsi | Language::English) {
            return Err(Error::ParamInvalid(format!(
                "decision {} is not FARSI or ENGLISH",
                d.language
            )));
        }
        writeln!(out, "{utt}\t{}\t{:?}", d.language, d.llr).unwrap();
    }
    Ok(out)
}

pub fn parse_lid(content: &str, file: &str) -> Result<Vec<(String, LidDecision)>> {
    let tf = TextFile::parse(content, file, "lid")?;
    tf.records()
        .map(|(n, f)| {
            tf.arity(n, &f, &[3])?;
            let language: Language = tf.field(n, &f, 1, "language")?;
            if !matches!(language, Language::Farsi | Language::English) {
                return Err(tf.err(n, "decision must be FARSI or ENGLISH"));
            }
            Ok((
                f[0].to_string(),
                LidDecision {
                    language,
                    llr: tf.field(n, &f, 2, "llr")?,
                },
            ))
        })
        .collect()
}

pub fn read_lid(path: &Path) -> Result<Vec<(String, LidDecision)>> {
    parse_lid(&read_text(path)?, &path.display().to_string())
}

pub fn write_lid(path: &Path, decisions: &[(String, LidDecision)]) -> Result<()> {
    write_file(path, format_lid(decisions)?.as_bytes())
}

// ---------------------------------------------------------------- batch manifests

pub fn format_manifests(passes: &[BatchManifest]) -> Result<String> {
    let mut out = header("manifest");
    for m in passes {
        writeln!(
            out,
            "#pass\t{}\t{}\t{}\t{}",
            m.pass_id, m.epoch_tag, m.group_size, m.padded_groups
        )
        .unwrap();
        for b in &m.batches {
            for (pos, e) in b.entries.iter().enumerate() {
                check_id(&e.utt_id)?;
                writeln!(
                    out,
                    "{}\t{}\t{pos}\t{}\t{}",
                    m.pass_id, b.index, e.utt_id, e.speaker
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}

pub fn parse_manifests(content: &str, file: &str) -> Result<Vec<BatchManifest>> {
    let tf = TextFile::parse(content, file, "manifest")?;
    let mut passes: Vec<BatchManifest> = Vec::new();
    for &(n, line) in &tf.lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f[0] == "#pass" {
            tf.arity(n, &f, &[5])?;
            passes.push(BatchManifest {
                pass_id: tf.field(n, &f, 1, "pass_id")?,
                epoch_tag: tf.field(n, &f, 2, "epoch_tag")?,
                group_size: tf.field(n, &f, 3, "group_size")?,
                padded_groups: tf.field(n, &f, 4, "padded_groups")?,
                batches: Vec::new(),
            });
            continue;
        }
        if f[0].starts_with('#') {
            continue;
        }
        tf.arity(n, &f, &[5])?;
        let pass = passes
            .last_mut()
            .ok_or_else(|| tf.err(n, "record before any #pass line"))?;
        let pass_id: u64 = tf.field(n, &f, 0, "pass_id")?;
        if pass_id != pass.pass_id {
            return Err(tf.err(n, "pass id differs from the enclosing #pass line"));
        }
        let batch_idx: usize = tf.field(n, &f, 1, "batch_idx")?;
        let pos: usize = tf.field(n, &f, 2, "pos")?;
        if pass.batches.last().map(|b| b.index) != Some(batch_idx) {
            if batch_idx != pass.batches.len() {
                return Err(tf.err(n, "batches out of order"));
            }
            pass.batches.push(Batch {
                index: batch_idx,
                entries: Vec::new(),
            });
        }
        let batch = pass.batches.last_mut().expect("pushed above");
        if pos != batch.entries.len() {
            return Err(tf.err(n, "positions out of order"));
        }
        batch.entries.push(BatchEntry {
            utt_id: f[3].to_string(),
            speaker: tf.field(n, &f, 4, "speaker_idx")?,
        });
    }
    Ok(passes)
}

pub fn read_manifests(path: &Path) -> Result<Vec<BatchManifest>> {
    parse_manifests(&read_text(path)?, &path.display().to_string())
}

pub fn write_manifests(path: &Path, passes: &[BatchManifest]) -> Result<()> {
    write_file(path, format_manifests(passes)?.as_bytes())
}

// ---------------------------------------------------------------- key-value models

pub fn format_gb(gb: &GaussianBackend) -> String {
    let mut out = header("gb");
    writeln!(out, "dim\t{}", gb.dim()).unwrap();
    writeln!(out, "weight\t{:?}", gb.weight()).unwrap();
    writeln!(out, "threshold\t{:?}", gb.threshold()).unwrap();
    writeln!(out, "mu_fa\t{}", join_vec(gb.mu_fa())).unwrap();
    writeln!(out, "mu_usa\t{}", join_vec(gb.mu_usa())).unwrap();
    writeln!(out, "mu_en\t{}", join_vec(gb.mu_en_effective())).unwrap();
    writeln!(out, "cov\t{}", join_vec(gb.covariance())).unwrap();
    out
}

pub fn parse_gb(content: &str, file: &str) -> Result<GaussianBackend> {
    let tf = TextFile::parse(content, file, "gb")?;
    let kv = tf.key_values()?;
    let get = |k: &str| {
        kv.get(k)
            .ok_or_else(|| tf.err(0, format!("missing key '{k}'")))
    };
    let scalar = |k: &str| -> Result<f64> {
        let (n, v) = get(k)?;
        tf.field(*n, v, 0, k)
    };
    let vector = |k: &str| -> Result<Vec<f64>> {
        let (n, v) = get(k)?;
        tf.vector(*n, v.first().copied().unwrap_or(""))
    };
    let (dn, dv) = get("dim")?;
    let dim: usize = tf.field(*dn, dv, 0, "dim")?;
    let mu_fa = vector("mu_fa")?;
    if mu_fa.len() != dim {
        return Err(tf.err(*dn, "mu_fa length differs from dim"));
    }
    let gb = GaussianBackend::from_parts(
        mu_fa,
        vector("mu_usa")?,
        vector("cov")?,
        scalar("weight")?,
        scalar("threshold")?,
    )?;
    if gb.mu_en_effective() != vector("mu_en")?.as_slice() {
        return Err(tf.err(
            get("mu_en")?.0,
            "mu_en is inconsistent with weight and class means",
        ));
    }
    Ok(gb)
}

pub fn read_gb(path: &Path) -> Result<GaussianBackend> {
    parse_gb(&read_text(path)?, &path.display().to_string())
}

pub fn write_gb(path: &Path, gb: &GaussianBackend) -> Result<()> {
    write_file(path, format_gb(gb).as_bytes())
}

pub fn format_alpha(off: &LanguageOffset) -> String {
    let mut out = header("alpha");
    writeln!(out, "alpha\t{:?}", off.alpha).unwrap();
    writeln!(out, "mu_farsi\t{:?}", off.mu_farsi).unwrap();
    writeln!(out, "mu_usa\t{:?}", off.mu_usa).unwrap();
    writeln!(out, "std_error\t{:?}", off.std_error).unwrap();
    writeln!(out, "top_n\t{}", off.top_n).unwrap();
    writeln!(out, "n_farsi\t{}", off.n_farsi).unwrap();
    writeln!(out, "n_usa\t{}", off.n_usa).unwrap();
    out
}

pub fn parse_alpha(content: &str, file: &str) -> Result<LanguageOffset> {
    let tf = TextFile::parse(content, file, "alpha")?;
    let kv = tf.key_values()?;
    fn get<T: FromStr>(
        tf: &TextFile<'_>,
        kv: &HashMap<&str, (usize, Vec<&str>)>,
        k: &str,
    ) -> Result<T> {
        let (n, v) = kv
            .get(k)
            .ok_or_else(|| tf.err(0, format!("missing key '{k}'")))?;
        tf.field(*n, v, 0, k)
    }
    let off = LanguageOffset {
        alpha: get(&tf, &kv, "alpha")?,
        mu_farsi: get(&tf, &kv, "mu_farsi")?,
        mu_usa: get(&tf, &kv, "mu_usa")?,
        std_error: get(&tf, &kv, "std_error")?,
        top_n: get(&tf, &kv, "top_n")?,
        n_farsi: get(&tf, &kv, "n_farsi")?,
        n_usa: get(&tf, &kv, "n_usa")?,
    };
    if !off.alpha.is_finite() {
        return Err(Error::NonFinite("alpha".into()));
    }
    Ok(off)
}

pub fn read_alpha(path: &Path) -> Result<LanguageOffset> {
    parse_alpha(&read_text(path)?, &path.display().to_string())
}

pub fn write_alpha(path: &Path, off: &LanguageOffset) -> Result<()> {
    write_file(path, format_alpha(off).as_bytes())
}

pub fn format_calibration(m: &CalibrationModel) -> Result<String> {
    check_id(&m.trained_on)?;
    let mut out = header("calibration");
    writeln!(out, "a\t{:?}", m.a).unwrap();
    writeln!(out, "b\t{:?}", m.b).unwrap();
    writeln!(out, "trained_on\t{}", m.trained_on).unwrap();
    Ok(out)
}

pub fn parse_calibration(content: &str, file: &str) -> Result<CalibrationModel> {
    let tf = TextFile::parse(content, file, "calibration")?;
    let kv = tf.key_values()?;
    let get = |k: &str| {
        kv.get(k)
            .ok_or_else(|| tf.err(0, format!("missing key '{k}'")))
    };
    let (na, va) = get("a")?;
    let (nb, vb) = get("b")?;
    let (_, vt) = get("trained_on")?;
    let m = CalibrationModel {
        a: tf.field(*na, va, 0, "a")?,
        b: tf.field(*nb, vb, 0, "b")?,
        trained_on: vt.first().copied().unwrap_or("").to_string(),
    };
    if !(m.a.is_finite() && m.b.is_finite()) {
        return Err(Error::NonFinite("calibration parameters".into()));
    }
    Ok(m)
}

pub fn read_calibration(path: &Path) -> Result<CalibrationModel> {
    parse_calibration(&read_text(path)?, &path.display().to_string())
}

pub fn write_calibration(path: &Path, m: &CalibrationModel) -> Result<()> {
    write_file(path, format_calibration(m)?.as_bytes())
}

/// Evaluation record written by `svb eval`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub eer: f64,
    pub min_dcf: f64,
    pub p_target: f64,
    pub c_miss: f64,
    pub c_fa: f64,
    pub targets: usize,
    pub nontargets: usize,
}

pub fn format_metrics(m: &MetricsRecord) -> String {
    let mut out = header("metrics");
    writeln!(out, "eer\t{:?}", m.eer).unwrap();
    writeln!(out, "min_dcf\t{:?}", m.min_dcf).unwrap();
    writeln!(out, "p_target\t{:?}", m.p_target).unwrap();
    writeln!(out, "c_miss\t{:?}", m.c_miss).unwrap();
    writeln!(out, "c_fa\t{:?}", m.c_fa).unwrap();
    writeln!(out, "targets\t{}", m.targets).unwrap();
    writeln!(out, "nontargets\t{}", m.nontargets).unwrap();
    out
}

pub fn parse_metrics(content: &str, file: &str) -> Result<MetricsRecord> {
    let tf = TextFile::parse(content, file, "metrics")?;
    let kv = tf.key_values()?;
    fn get<T: FromStr>(
        tf: &TextFile<'_>,
        kv: &HashMap<&str, (usize, Vec<&str>)>,
        k: &str,
    ) -> Result<T> {
        let (n, v) = kv
            .get(k)
            .ok_or_else(|| tf.err(0, format!("missing key '{k}'")))?;
        tf.field(*n, v, 0, k)
    }
    Ok(MetricsRecord {
        eer: get(&tf, &kv, "eer")?,
        min_dcf: get(&tf, &kv, "min_dcf")?,
        p_target: get(&tf, &kv, "p_target")?,
        c_miss: get(&tf, &kv, "c_miss")?,
        c_fa: get(&tf, &kv, "c_fa")?,
        targets: get(&tf, &kv, "targets")?,
        nontargets: get(&tf, &kv, "nontargets")?,
    })
}

pub fn write_metrics(path: &Path, m: &MetricsRecord) -> Result<()> {
    write_file(path, format_metrics(m).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(id: &str, v: Vec<f64>) -> Embedding {
        Embedding {
            utt_id: id.into(),
            speaker_id: "spk".into(),
            domain: Domain::Libri,
            language: Language::Unknown,
            vec: v,
        }
    }

    #[test]
    fn header_checks() {
        assert!(matches!(
            parse_trials("#fmt:trials:2\nm\tt\n", "x"),
            Err(Error::VersionUnsupported { .. })
        ));
        assert!(matches!(
            parse_trials("m\tt\n", "x"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_trials("#fmt:scores:1\n", "x"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert_eq!(parse_trials("#fmt:trials:1\n", "x").unwrap(), vec![]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "#fmt:scores:1\nm\tt\t0.5\nm\tu\tnot-a-float\n";
        match parse_scores(bad, "s.tsv") {
            Err(Error::Parse { file, line, .. }) => {
                assert_eq!(file, "s.tsv");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
        let ragged = "#fmt:embeddings:1\nu1\ts\tVOX\tFARSI\t1,2\nu2\ts\tVOX\tFARSI\t1,2,3\n";
        assert!(matches!(
            parse_embeddings(ragged, "e"),
            Err(Error::Parse { line: 3, .. })
        ));
        let bad_lang = "#fmt:lid:1\nu\tOTHER\t0.1\n";
        assert!(parse_lid(bad_lang, "l").is_err());
    }

    #[test]
    fn binary_layout() {
        let e = vec![emb("a", vec![1.0, -2.5]), emb("bb", vec![0.25, 3.0])];
        let bytes = encode_embeddings_binary(&e).unwrap();
        assert_eq!(&bytes[..4], b"SVEB");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[10..18].try_into().unwrap()), 2);
        assert_eq!(f32::from_le_bytes(bytes[18..22].try_into().unwrap()), 1.0);
        assert_eq!(f32::from_le_bytes(bytes[22..26].try_into().unwrap()), -2.5);
        assert_eq!(decode_embeddings_binary(&bytes, "b").unwrap(), e);

        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            decode_embeddings_binary(&wrong_version, "b"),
            Err(Error::VersionUnsupported { .. })
        ));
        assert!(decode_embeddings_binary(&bytes[..bytes.len() - 1], "b").is_err());
    }

    #[test]
    fn ids_with_whitespace_are_rejected() {
        assert!(format_embeddings(&[emb("a b", vec![1.0])]).is_err());
        assert!(format_embeddings(&[emb("#a", vec![1.0])]).is_err());
    }

    #[test]
    fn floats_use_shortest_repr() {
        let text = format_embeddings(&[emb("a", vec![0.1, 1.0 / 3.0, 1e-300])]).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.ends_with("0.1,0.3333333333333333,1e-300"), "{line}");
        assert!(format_embeddings(&[emb("a", vec![1.0])])
            .unwrap()
            .ends_with("\t1.0\n"));
    }
}
