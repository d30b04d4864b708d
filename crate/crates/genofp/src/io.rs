//! CSV readers and writers for databases, pedigrees, correlation models,
//! fingerprint masks, case/control splits and the SP registry.
//!
//! The database format is `id,<locus1>,...,<locusN>` with one row per
//! individual and raw 2-bit codes stored as integers 0-3. Loading is the
//! exact inverse of saving.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::keyed::Fingerprint;
use crate::metrics::CaseControlSplit;
use crate::snp::{
    FingerprintMask, JointModel, JointTable, ModelError, Pedigree, SimilarityModel, SnpCode,
    SnpDatabase, Trio, GENOTYPE_VALUES,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        DataError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn writer(path: &Path) -> Result<BufWriter<File>, DataError> {
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    Ok(BufWriter::new(file))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

pub fn load_database(path: &Path) -> Result<SnpDatabase, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.is_empty() || header.get(0) != Some("id") {
        return Err(DataError::parse(path, 1, "expected header starting with 'id'"));
    }
    let loci: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut keys = Vec::new();
    let mut cells = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record_line(&record);
        if record.len() != loci.len() + 1 {
            return Err(DataError::parse(
                path,
                line,
                format!("expected {} fields, got {}", loci.len() + 1, record.len()),
            ));
        }
        keys.push(record[0].to_string());
        for field in record.iter().skip(1) {
            let raw: u8 = field.parse().map_err(|_| {
                DataError::parse(path, line, format!("invalid cell value {field:?}"))
            })?;
            let code = SnpCode::new(raw).ok_or_else(|| {
                DataError::parse(path, line, format!("cell value {raw} out of range 0-3"))
            })?;
            cells.push(code);
        }
    }
    Ok(SnpDatabase::new(keys, loci, cells)?)
}

pub fn save_database(db: &SnpDatabase, path: &Path) -> Result<(), DataError> {
    let mut w = writer(path)?;
    let mut line = String::from("id");
    for locus in db.loci() {
        line.push(',');
        line.push_str(locus);
    }
    line.push('\n');
    w.write_all(line.as_bytes()).map_err(|e| DataError::io(path, e))?;
    for i in 0..db.rows() {
        let mut row = db.primary_keys()[i].clone();
        for j in 0..db.loci_count() {
            row.push(',');
            row.push((b'0' + db.cell(i, j).raw()) as char);
        }
        row.push('\n');
        w.write_all(row.as_bytes()).map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn load_pedigree(path: &Path) -> Result<Pedigree, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    let expected = ["family_id", "mother", "father", "child"];
    if header.iter().ne(expected) {
        return Err(DataError::parse(path, 1, "expected header family_id,mother,father,child"));
    }
    let mut trios = Vec::new();
    for result in rdr.records() {
        let record = result?;
        trios.push(Trio {
            family_id: record[0].to_string(),
            mother: record[1].to_string(),
            father: record[2].to_string(),
            child: record[3].to_string(),
        });
    }
    Ok(Pedigree::new(trios)?)
}

pub fn save_pedigree(ped: &Pedigree, path: &Path) -> Result<(), DataError> {
    let mut w = writer(path)?;
    writeln!(w, "family_id,mother,father,child").map_err(|e| DataError::io(path, e))?;
    for t in ped.trios() {
        writeln!(w, "{},{},{},{}", t.family_id, t.mother, t.father, t.child)
            .map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn load_similarity(path: &Path) -> Result<SimilarityModel, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(["row_i", "row_j", "similarity"]) {
        return Err(DataError::parse(path, 1, "expected header row_i,row_j,similarity"));
    }
    let mut model = SimilarityModel::default();
    for result in rdr.records() {
        let record = result?;
        let line = record_line(&record);
        let s: u64 = record[2]
            .parse()
            .map_err(|_| DataError::parse(path, line, "invalid similarity"))?;
        model.insert(record[0].to_string(), record[1].to_string(), s);
    }
    Ok(model)
}

pub fn save_similarity(model: &SimilarityModel, path: &Path) -> Result<(), DataError> {
    let mut w = writer(path)?;
    writeln!(w, "row_i,row_j,similarity").map_err(|e| DataError::io(path, e))?;
    for ((i, j), s) in model.iter() {
        writeln!(w, "{i},{j},{s}").map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn load_joint(path: &Path) -> Result<JointModel, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(["p", "q", "a", "b", "prob"]) {
        return Err(DataError::parse(path, 1, "expected header p,q,a,b,prob"));
    }
    let mut model = JointModel::default();
    let mut current: Option<(String, String, JointTable)> = None;
    for result in rdr.records() {
        let record = result?;
        let line = record_line(&record);
        let p = record[0].to_string();
        let q = record[1].to_string();
        let a: usize = record[2]
            .parse()
            .map_err(|_| DataError::parse(path, line, "invalid a"))?;
        let b: usize = record[3]
            .parse()
            .map_err(|_| DataError::parse(path, line, "invalid b"))?;
        if a >= GENOTYPE_VALUES || b >= GENOTYPE_VALUES {
            return Err(DataError::parse(path, line, "cell index out of range 0-2"));
        }
        let prob: f64 = record[4]
            .parse()
            .map_err(|_| DataError::parse(path, line, "invalid probability"))?;
        match &mut current {
            Some((cp, cq, table)) if *cp == p && *cq == q => table[a][b] = prob,
            _ => {
                if let Some((cp, cq, table)) = current.take() {
                    model.insert(cp, cq, table);
                }
                let mut table = [[0.0; GENOTYPE_VALUES]; GENOTYPE_VALUES];
                table[a][b] = prob;
                current = Some((p, q, table));
            }
        }
    }
    if let Some((cp, cq, table)) = current {
        model.insert(cp, cq, table);
    }
    Ok(model)
}

pub fn save_joint(model: &JointModel, path: &Path) -> Result<(), DataError> {
    let mut w = writer(path)?;
    writeln!(w, "p,q,a,b,prob").map_err(|e| DataError::io(path, e))?;
    for (i, (p, q)) in model.pairs().iter().enumerate() {
        let table = model.table(i);
        for (a, row) in table.iter().enumerate() {
            for (b, prob) in row.iter().enumerate() {
                writeln!(w, "{p},{q},{a},{b},{prob:.15}").map_err(|e| DataError::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

/// Mask persisted as the list of marked (row_key, locus) pairs.
pub fn save_mask(mask: &FingerprintMask, db: &SnpDatabase, path: &Path) -> Result<(), DataError> {
    let mut w = writer(path)?;
    writeln!(w, "row_key,locus").map_err(|e| DataError::io(path, e))?;
    for i in 0..db.rows() {
        for j in 0..db.loci_count() {
            if mask.is_marked(i, j) {
                writeln!(w, "{},{}", db.primary_keys()[i], db.loci()[j])
                    .map_err(|e| DataError::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn load_mask(db: &SnpDatabase, path: &Path) -> Result<FingerprintMask, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(["row_key", "locus"]) {
        return Err(DataError::parse(path, 1, "expected header row_key,locus"));
    }
    let mut mask = FingerprintMask::new(db.rows(), db.loci_count());
    for result in rdr.records() {
        let record = result?;
        let line = record_line(&record);
        let row = db
            .row_index(&record[0])
            .ok_or_else(|| DataError::parse(path, line, format!("unknown row key {:?}", &record[0])))?;
        let col = db
            .locus_position(&record[1])
            .ok_or_else(|| DataError::parse(path, line, format!("unknown locus {:?}", &record[1])))?;
        mask.mark(row, col);
    }
    Ok(mask)
}

pub fn save_split(split: &CaseControlSplit, path: &Path) -> Result<(), DataError> {
    let mut w = writer(path)?;
    writeln!(w, "key,group").map_err(|e| DataError::io(path, e))?;
    for k in split.case_keys() {
        writeln!(w, "{k},case").map_err(|e| DataError::io(path, e))?;
    }
    for k in split.control_keys() {
        writeln!(w, "{k},control").map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn load_split(path: &Path) -> Result<CaseControlSplit, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(["key", "group"]) {
        return Err(DataError::parse(path, 1, "expected header key,group"));
    }
    let mut case = Vec::new();
    let mut control = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record_line(&record);
        match &record[1] {
            "case" => case.push(record[0].to_string()),
            "control" => control.push(record[0].to_string()),
            other => {
                return Err(DataError::parse(path, line, format!("unknown group {other:?}")))
            }
        }
    }
    CaseControlSplit::from_groups(case, control)
        .map_err(|e| DataError::parse(path, 0, e.to_string()))
}

/// SP registry rows: `sp_id,fingerprint_hex`.
pub fn load_registry(path: &Path) -> Result<Vec<(u64, Fingerprint)>, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(["sp_id", "fingerprint_hex"]) {
        return Err(DataError::parse(path, 1, "expected header sp_id,fingerprint_hex"));
    }
    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record_line(&record);
        let sp_id: u64 = record[0]
            .parse()
            .map_err(|_| DataError::parse(path, line, "invalid sp_id"))?;
        let fp = Fingerprint::from_hex(&record[1], sp_id)
            .ok_or_else(|| DataError::parse(path, line, "invalid fingerprint hex"))?;
        out.push((sp_id, fp));
    }
    Ok(out)
}

pub fn save_registry(entries: &[(u64, Fingerprint)], path: &Path) -> Result<(), DataError> {
    let mut w = writer(path)?;
    writeln!(w, "sp_id,fingerprint_hex").map_err(|e| DataError::io(path, e))?;
    for (sp_id, fp) in entries {
        writeln!(w, "{},{}", sp_id, fp.to_hex()).map_err(|e| DataError::io(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}
