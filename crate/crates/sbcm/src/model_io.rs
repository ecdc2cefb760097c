//! Versioned plain-text model records. Every line is a keyword followed by
//! whitespace-separated values; reals carry 17 significant digits, so models
//! round-trip bit-exactly.

use std::path::Path;

use sbcm_core::fusion::{
    FusionModel, GmmFusion, LinearFusion, MultinomialFusion, PolyKernel, Standardizer, SvmFusion,
};
use sbcm_core::{CmPair, GmmModel, Matrix};

use crate::error::{read_text, write_atomic, LineError, Result};
use crate::scores::{format_hash, parse_hash};

const GMM_MAGIC: &str = "sbcm-gmm";
const CM_MAGIC: &str = "sbcm-cm";
const FUSION_MAGIC: &str = "sbcm-fusion";
const VERSION: &str = "1";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Default)]
struct Writer(String);

impl Writer {
    fn line<I, S>(&mut self, key: &str, values: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.0.push_str(key);
        for v in values {
            self.0.push(' ');
            self.0.push_str(v.as_ref());
        }
        self.0.push('\n');
    }

    fn floats(&mut self, key: &str, values: &[f64]) {
        self.line(key, values.iter().map(|v| num(*v)));
    }

    fn gmm(&mut self, g: &GmmModel) {
        self.line("gmm", [g.n_components().to_string(), g.dims().to_string()]);
        self.floats("weights", g.weights());
        for k in 0..g.n_components() {
            self.floats("mean", g.mean(k));
        }
        for k in 0..g.n_components() {
            self.floats("variance", g.variance(k));
        }
    }

    fn standardizer(&mut self, s: &Standardizer) {
        self.floats("standardizer_mean", &s.mean);
        self.floats("standardizer_scale", &s.scale);
    }
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

type Parsed<T> = std::result::Result<T, LineError>;

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)).collect();
        Reader { lines, pos: 0 }
    }

    fn line_no(&self) -> usize {
        self.lines.get(self.pos).map_or_else(|| self.lines.last().map_or(1, |l| l.0 + 1), |l| l.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Parsed<T> {
        Err(LineError::new(self.line_no(), msg))
    }

    /// Values of the next line, which must start with `key`.
    fn next(&mut self, key: &str) -> Parsed<Vec<&'a str>> {
        let Some(&(_, line)) = self.lines.get(self.pos) else {
            return self.err(format!("unexpected end of file, expected {key:?}"));
        };
        let mut f = line.split_whitespace();
        if f.next() != Some(key) {
            return self.err(format!("expected {key:?}"));
        }
        self.pos += 1;
        Ok(f.collect())
    }

    fn back<T>(&mut self, msg: impl Into<String>) -> Parsed<T> {
        self.pos -= 1;
        let e = self.err(msg);
        self.pos += 1;
        e
    }

    fn one(&mut self, key: &str) -> Parsed<&'a str> {
        match self.next(key)?[..] {
            [v] => Ok(v),
            _ => self.back(format!("{key} takes exactly one value")),
        }
    }

    fn usize(&mut self, key: &str) -> Parsed<usize> {
        let v = self.one(key)?;
        v.parse().or_else(|_| self.back(format!("bad integer {v:?}")))
    }

    fn hash(&mut self, key: &str) -> Parsed<u64> {
        let v = self.one(key)?;
        parse_hash(v).map_or_else(|| self.back(format!("bad hash {v:?}")), Ok)
    }

    fn floats(&mut self, key: &str, n: usize) -> Parsed<Vec<f64>> {
        let vals = self.next(key)?;
        if vals.len() != n {
            return self.back(format!("{key} needs {n} values, found {}", vals.len()));
        }
        let mut out = Vec::with_capacity(n);
        for v in vals {
            match v.parse::<f64>() {
                Ok(x) => out.push(x),
                Err(_) => return self.back(format!("bad number {v:?}")),
            }
        }
        Ok(out)
    }

    fn header(&mut self, magic: &str) -> Parsed<()> {
        let v = self.one(magic)?;
        if v != VERSION {
            return self.back(format!("unsupported {magic} version {v}"));
        }
        Ok(())
    }

    fn gmm(&mut self) -> Parsed<GmmModel> {
        let start = self.pos;
        let shape = self.next("gmm")?;
        let [k, d] = shape[..] else { return self.back("gmm takes K and dims") };
        let (Ok(k), Ok(d)) = (k.parse::<usize>(), d.parse::<usize>()) else {
            return self.back("bad gmm shape");
        };
        let weights = self.floats("weights", k)?;
        let mut means = Vec::with_capacity(k * d);
        for _ in 0..k {
            means.extend(self.floats("mean", d)?);
        }
        let mut vars = Vec::with_capacity(k * d);
        for _ in 0..k {
            vars.extend(self.floats("variance", d)?);
        }
        GmmModel::new(weights, means, vars).map_err(|e| LineError::new(self.lines[start].0, e.to_string()))
    }

    fn standardizer(&mut self, d: usize) -> Parsed<Standardizer> {
        Ok(Standardizer { mean: self.floats("standardizer_mean", d)?, scale: self.floats("standardizer_scale", d)? })
    }

    fn finish(&self) -> Parsed<()> {
        if self.pos < self.lines.len() {
            return self.err("trailing content");
        }
        Ok(())
    }
}

pub fn format_gmm(g: &GmmModel, config_hash: u64) -> String {
    let mut w = Writer::default();
    w.line(GMM_MAGIC, [VERSION]);
    w.line("config_hash", [format_hash(config_hash)]);
    w.gmm(g);
    w.0
}

pub fn parse_gmm(text: &str) -> Parsed<(GmmModel, u64)> {
    let mut r = Reader::new(text);
    r.header(GMM_MAGIC)?;
    let hash = r.hash("config_hash")?;
    let g = r.gmm()?;
    r.finish()?;
    Ok((g, hash))
}

/// A countermeasure together with the hash of the experiment config that produced it.
pub fn format_cm(cm: &CmPair, config_hash: u64) -> String {
    let mut w = Writer::default();
    w.line(CM_MAGIC, [VERSION]);
    w.line("config_hash", [format_hash(config_hash)]);
    w.line("frontend_hash", [format_hash(cm.frontend_hash)]);
    w.line("class", ["bonafide"]);
    w.gmm(&cm.bona);
    w.line("class", ["spoof"]);
    w.gmm(&cm.spoof);
    w.0
}

pub fn parse_cm(text: &str) -> Parsed<(CmPair, u64)> {
    let mut r = Reader::new(text);
    r.header(CM_MAGIC)?;
    let hash = r.hash("config_hash")?;
    let fe = r.hash("frontend_hash")?;
    if r.one("class")? != "bonafide" {
        return r.back("expected the bonafide model first");
    }
    let bona = r.gmm()?;
    if r.one("class")? != "spoof" {
        return r.back("expected the spoof model second");
    }
    let spoof = r.gmm()?;
    r.finish()?;
    let line = r.line_no();
    let cm = CmPair::new(bona, spoof, fe).map_err(|e| LineError::new(line, e.to_string()))?;
    Ok((cm, hash))
}

pub fn format_fusion(model: &FusionModel, config_hash: u64) -> String {
    let mut w = Writer::default();
    w.line(FUSION_MAGIC, [VERSION]);
    w.line("kind", [model.kind().as_str()]);
    w.line("config_hash", [format_hash(config_hash)]);
    w.line("dims", [model.dims().to_string()]);
    match model {
        FusionModel::Linear(m) => {
            w.floats("weights", &m.weights);
            w.floats("bias", &[m.bias]);
        }
        FusionModel::Multinomial(m) => {
            w.line("classes", &m.classes);
            for c in 0..m.classes.len() {
                w.floats("class_weights", m.weights.row(c));
            }
            w.floats("biases", &m.biases);
        }
        FusionModel::Gmm(m) => {
            w.standardizer(&m.standardizer);
            w.line("class", ["bonafide"]);
            w.gmm(&m.bona);
            w.line("class", ["spoof"]);
            w.gmm(&m.spoof);
        }
        FusionModel::Svm(m) => {
            w.standardizer(&m.standardizer);
            w.line("kernel", [num(m.kernel.gamma), num(m.kernel.coef0), m.kernel.degree.to_string()]);
            w.floats("rho", &[m.rho]);
            w.line("support_vectors", [m.coef.len().to_string()]);
            for (c, sv) in m.coef.iter().zip(m.support.iter_rows()) {
                w.line("sv", std::iter::once(num(*c)).chain(sv.iter().map(|v| num(*v))));
            }
        }
    }
    w.0
}

pub fn parse_fusion(text: &str) -> Parsed<(FusionModel, u64)> {
    use sbcm_core::fusion::FusionKind;
    let mut r = Reader::new(text);
    r.header(FUSION_MAGIC)?;
    let kind_str = r.one("kind")?;
    let kind = FusionKind::parse(kind_str).map_or_else(|| r.back(format!("unknown fusion kind {kind_str:?}")), Ok)?;
    let hash = r.hash("config_hash")?;
    let d = r.usize("dims")?;
    if d == 0 {
        return r.back("dims must be positive");
    }
    let model = match kind {
        FusionKind::Linear => {
            let weights = r.floats("weights", d)?;
            let bias = r.floats("bias", 1)?[0];
            FusionModel::Linear(LinearFusion { weights, bias })
        }
        FusionKind::Multinomial => {
            let classes: Vec<String> = r.next("classes")?.into_iter().map(String::from).collect();
            if classes.len() < 2 {
                return r.back("need at least two classes");
            }
            let mut weights = Matrix::zeros(classes.len(), d);
            for c in 0..classes.len() {
                weights.row_mut(c).copy_from_slice(&r.floats("class_weights", d)?);
            }
            let biases = r.floats("biases", classes.len())?;
            FusionModel::Multinomial(MultinomialFusion { classes, weights, biases })
        }
        FusionKind::Gmm => {
            let standardizer = r.standardizer(d)?;
            if r.one("class")? != "bonafide" {
                return r.back("expected the bonafide model first");
            }
            let bona = r.gmm()?;
            if r.one("class")? != "spoof" {
                return r.back("expected the spoof model second");
            }
            let spoof = r.gmm()?;
            if bona.dims() != d || spoof.dims() != d {
                return r.back("class models do not match dims");
            }
            FusionModel::Gmm(GmmFusion { standardizer, bona, spoof })
        }
        FusionKind::SvmPoly => {
            let standardizer = r.standardizer(d)?;
            let k = r.next("kernel")?;
            let kernel = match k[..] {
                [g, c, p] => match (g.parse(), c.parse(), p.parse()) {
                    (Ok(gamma), Ok(coef0), Ok(degree)) => PolyKernel { gamma, coef0, degree },
                    _ => return r.back("bad kernel parameters"),
                },
                _ => return r.back("kernel takes gamma, coef0 and degree"),
            };
            let rho = r.floats("rho", 1)?[0];
            let n = r.usize("support_vectors")?;
            let mut support = Matrix::zeros(n, d);
            let mut coef = Vec::with_capacity(n);
            for i in 0..n {
                let v = r.floats("sv", d + 1)?;
                coef.push(v[0]);
                support.row_mut(i).copy_from_slice(&v[1..]);
            }
            FusionModel::Svm(SvmFusion { standardizer, kernel, support, coef, rho })
        }
    };
    r.finish()?;
    Ok((model, hash))
}

pub fn read_cm(path: &Path) -> Result<(CmPair, u64)> {
    parse_cm(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_cm(path: &Path, cm: &CmPair, config_hash: u64) -> Result<()> {
    write_atomic(path, format_cm(cm, config_hash).as_bytes())
}

pub fn read_fusion(path: &Path) -> Result<(FusionModel, u64)> {
    parse_fusion(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_fusion(path: &Path, model: &FusionModel, config_hash: u64) -> Result<()> {
    write_atomic(path, format_fusion(model, config_hash).as_bytes())
}

