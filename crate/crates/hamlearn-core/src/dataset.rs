//! Randomized-measurement datasets and their binary file format.
//!
//! In memory a dataset is struct-of-arrays: per record and qubit, a
//! stabilizer input label (6 choices), a measurement basis (3 choices), and
//! an outcome sign. On disk each record packs those into 6 bits per qubit
//! behind a fixed 66-byte header, LSB-first.

use crate::error::{Error, Result};
use crate::pauli::{Axis, StabilizerLabel};

pub const DATASET_MAGIC: [u8; 4] = *b"HLRN";
pub const DATASET_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    k: usize,
    seed: u64,
    gamma: f64,
    plan_digest: [u8; 32],
    n_records: usize,
    labels: Vec<u8>,
    bases: Vec<u8>,
    outcomes: Vec<u8>,
}

/// One record's slices; codes are indices into the label/axis tables.
#[derive(Debug, Clone, Copy)]
pub struct RecordView<'a> {
    pub labels: &'a [u8],
    pub bases: &'a [u8],
    pub outcomes: &'a [u8],
}

impl<'a> RecordView<'a> {
    pub fn label(&self, qubit: usize) -> StabilizerLabel {
        StabilizerLabel::from_code(self.labels[qubit]).expect("validated on construction")
    }

    pub fn basis(&self, qubit: usize) -> Axis {
        Axis::from_code(self.bases[qubit]).expect("validated on construction")
    }

    /// Measured sign at `qubit`: +1 or -1.
    pub fn sign(&self, qubit: usize) -> f64 {
        if self.outcomes[qubit] == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl Dataset {
    pub fn new(n: usize, k: usize, seed: u64, gamma: f64, plan_digest: [u8; 32]) -> Dataset {
        Dataset {
            n,
            k,
            seed,
            gamma,
            plan_digest,
            n_records: 0,
            labels: Vec::new(),
            bases: Vec::new(),
            outcomes: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn plan_digest(&self) -> &[u8; 32] {
        &self.plan_digest
    }

    pub fn len(&self) -> usize {
        self.n_records
    }

    pub fn is_empty(&self) -> bool {
        self.n_records == 0
    }

    pub fn push_record(&mut self, labels: &[u8], bases: &[u8], outcomes: &[u8]) {
        debug_assert_eq!(labels.len(), self.n);
        debug_assert_eq!(bases.len(), self.n);
        debug_assert_eq!(outcomes.len(), self.n);
        debug_assert!(labels.iter().all(|&c| c < 6));
        debug_assert!(bases.iter().all(|&c| c < 3));
        debug_assert!(outcomes.iter().all(|&c| c < 2));
        self.labels.extend_from_slice(labels);
        self.bases.extend_from_slice(bases);
        self.outcomes.extend_from_slice(outcomes);
        self.n_records += 1;
    }

    pub fn record(&self, l: usize) -> RecordView<'_> {
        let lo = l * self.n;
        let hi = lo + self.n;
        RecordView {
            labels: &self.labels[lo..hi],
            bases: &self.bases[lo..hi],
            outcomes: &self.outcomes[lo..hi],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = RecordView<'_>> {
        (0..self.n_records).map(|l| self.record(l))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let record_bytes = (6 * self.n).div_ceil(8);
        let mut out = Vec::with_capacity(66 + record_bytes * self.n_records);
        out.extend_from_slice(&DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.push(0); // record kind, reserved
        out.push(self.n as u8);
        out.extend_from_slice(&(self.k as u16).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.n_records as u64).to_le_bytes());
        out.extend_from_slice(&self.gamma.to_le_bytes());
        out.extend_from_slice(&self.plan_digest);
        for l in 0..self.n_records {
            let rec = self.record(l);
            let mut bits = BitWriter::new(record_bytes);
            for q in 0..self.n {
                bits.push(rec.labels[q] as u32, 3);
            }
            for q in 0..self.n {
                bits.push(rec.bases[q] as u32, 2);
            }
            for q in 0..self.n {
                bits.push(rec.outcomes[q] as u32, 1);
            }
            out.extend_from_slice(&bits.finish());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
        let fail = |msg: &str| Error::DatasetFormat(msg.to_string());
        if bytes.len() < 66 {
            return Err(fail("file shorter than the 66-byte header"));
        }
        if bytes[0..4] != DATASET_MAGIC {
            return Err(fail("bad magic number"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != DATASET_VERSION {
            return Err(Error::DatasetFormat(format!(
                "unsupported version {version}"
            )));
        }
        let n = bytes[7] as usize;
        if n == 0 || n > 64 {
            return Err(fail("qubit count out of range"));
        }
        let k = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let seed = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
        let n_records = u64::from_le_bytes(bytes[18..26].try_into().unwrap()) as usize;
        let gamma = f64::from_le_bytes(bytes[26..34].try_into().unwrap());
        let plan_digest: [u8; 32] = bytes[34..66].try_into().unwrap();
        let record_bytes = (6 * n).div_ceil(8);
        let body = &bytes[66..];
        if body.len() != record_bytes * n_records {
            return Err(Error::DatasetFormat(format!(
                "expected {} record bytes, found {}",
                record_bytes * n_records,
                body.len()
            )));
        }
        let mut ds = Dataset::new(n, k, seed, gamma, plan_digest);
        let mut labels = vec![0u8; n];
        let mut bases = vec![0u8; n];
        let mut outcomes = vec![0u8; n];
        for l in 0..n_records {
            let chunk = &body[l * record_bytes..(l + 1) * record_bytes];
            let mut bits = BitReader::new(chunk);
            for v in labels.iter_mut() {
                *v = bits.pull(3) as u8;
                if *v > 5 {
                    return Err(fail("label code out of range"));
                }
            }
            for v in bases.iter_mut() {
                *v = bits.pull(2) as u8;
                if *v > 2 {
                    return Err(fail("basis code out of range"));
                }
            }
            for v in outcomes.iter_mut() {
                *v = bits.pull(1) as u8;
            }
            ds.push_record(&labels, &bases, &outcomes);
        }
        Ok(ds)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Dataset> {
        if !path.exists() {
            return Err(Error::MissingInput {
                path: path.display().to_string(),
            });
        }
        Dataset::from_bytes(&std::fs::read(path)?)
    }
}

struct BitWriter {
    buf: Vec<u8>,
    bit: usize,
}

impl BitWriter {
    fn new(capacity: usize) -> BitWriter {
        BitWriter {
            buf: vec![0; capacity],
            bit: 0,
        }
    }

    fn push(&mut self, value: u32, width: usize) {
        for i in 0..width {
            if value & (1 << i) != 0 {
                self.buf[self.bit / 8] |= 1 << (self.bit % 8);
            }
            self.bit += 1;
        }
    }

    fn finish(self) -> Vec<u8> {
        self.buf
    }
}

struct BitReader<'a> {
    buf: &'a [u8],
    bit: usize,
}

impl<'a> BitReader<'a> {
    fn new(buf: &'a [u8]) -> BitReader<'a> {
        BitReader { buf, bit: 0 }
    }

    fn pull(&mut self, width: usize) -> u32 {
        let mut value = 0u32;
        for i in 0..width {
            if self.buf[self.bit / 8] & (1 << (self.bit % 8)) != 0 {
                value |= 1 << i;
            }
            self.bit += 1;
        }
        value
    }
}
