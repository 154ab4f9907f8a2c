//! Experiment config: flat `key = value` text with dotted sections.
//!
//! Every key read through [`Config`] is recorded; [`Config::finish`]
//! rejects whatever the subcommand never asked for, so a misspelt key is
//! an error rather than a silent default.

use std::cell::RefCell;
use std::collections::BTreeSet;

use hlp::kernel::KernelFamily;
use hlp::kv::KvMap;
use hlp::LatticeParams;
use sha2::{Digest, Sha256};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub struct Config {
    map: KvMap,
    used: RefCell<BTreeSet<String>>,
    pub seed: u64,
    /// SHA-256 of the canonical rendering, seed included.
    pub hash: String,
}

impl Config {
    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self> {
        let mut map = KvMap::parse(text)?;
        let seed = match seed {
            Some(s) => s,
            None => map.u64("seed")?.unwrap_or(0),
        };
        map.insert("seed", seed.to_string());
        let hash = hex::encode(Sha256::digest(map.render().as_bytes()));
        let cfg = Self {
            map,
            used: RefCell::new(BTreeSet::from(["seed".to_string()])),
            seed,
            hash,
        };
        Ok(cfg)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map
            .keys()
            .map(|k| (k, self.map.get(k).unwrap_or_default()))
    }

    fn mark(&self, key: &str) {
        self.used.borrow_mut().insert(key.to_string());
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.mark(key);
        self.map.get(key)
    }

    pub fn req_str(&self, key: &str) -> Result<&str> {
        self.str(key)
            .ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.mark(key);
        Ok(self.map.f64(key)?)
    }

    pub fn req_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| missing(key))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.mark(key);
        Ok(self.map.u64(key)?)
    }

    pub fn req_u64(&self, key: &str) -> Result<u64> {
        self.u64(key)?.ok_or_else(|| missing(key))
    }

    pub fn u32(&self, key: &str) -> Result<Option<u32>> {
        self.mark(key);
        Ok(self.map.u32(key)?)
    }

    pub fn req_u32(&self, key: &str) -> Result<u32> {
        self.u32(key)?.ok_or_else(|| missing(key))
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.mark(key);
        Ok(self.map.bool(key)?)
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.mark(key);
        Ok(self.map.f64_list(key)?)
    }

    pub fn u32_list(&self, key: &str) -> Result<Option<Vec<u32>>> {
        self.mark(key);
        Ok(self.map.u32_list(key)?)
    }

    /// `lattice.L`, `lattice.d`, `lattice.n`.
    pub fn lattice(&self) -> Result<LatticeParams> {
        let l = self.req_u32("lattice.L")?;
        let d = self.u32("lattice.d")?.unwrap_or(1);
        let n = self.req_u32("lattice.n")?;
        Ok(LatticeParams::new(l, d, n)?)
    }

    /// The `kernel.` section; the family parser rejects its own strays.
    pub fn family(&self, p: LatticeParams) -> Result<KernelFamily> {
        let section = self.map.section("kernel");
        for k in section.keys() {
            self.mark(&format!("kernel.{k}"));
        }
        Ok(KernelFamily::from_kv(p, &section, &[])?)
    }

    /// Site-open probability from `mode` and `q`.
    pub fn site_q(&self) -> Result<f64> {
        match self.str("mode").unwrap_or("bond") {
            "bond" => {
                if self.map.contains("q") {
                    return Err(CliError::Config("`q` needs mode = site-bond".into()));
                }
                Ok(1.0)
            }
            "site-bond" => self.req_f64("q"),
            other => Err(CliError::Config(format!("unknown mode `{other}`"))),
        }
    }

    /// Fails on the first key nothing asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.map.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(CliError::Config(format!(
                "unknown key `{k}` for this subcommand"
            ))),
            None => Ok(()),
        }
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing key `{key}`"))
}
