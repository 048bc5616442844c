//! Datasets, domains, and design specifications, with file round-trips.
//!
//! A dataset is an `s x n` matrix: one row per subject, one column per
//! location. The domain describes the geometry of the columns, either a 2-D
//! pixel grid (row-major, unit spacing) or an explicit coordinate list. The
//! measures themselves never look at the geometry; it exists for synthesis
//! and for grid-shaped exports.
//!
//! Two on-disk formats are supported:
//!
//! * CSV: a `# domain:` header line, an optional `# coord:` block for point
//!   domains, then `s` rows of comma-separated values. Numbers are written
//!   as shortest round-trip decimals, so a save/load cycle is value-exact.
//! * Binary: two little-endian `u64` dimensions followed by the row-major
//!   `f64` payload, bit-exact by construction. The binary format carries no
//!   geometry; loaded files get a 1-D grid domain.
//!
//! Designs live in their own CSV: a `# design:` header declaring the column
//! split, `# contrast:` lines (one per contrast row), then `s` rows holding
//! the interest columns followed by the nuisance columns.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Geometry of the location axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Row-major pixel grid with unit spacing; location `i` sits at
    /// `(x, y) = (i % width, i / width)`.
    Grid { width: usize, height: usize },
    /// Explicit coordinates in `R^dim`, one entry per location.
    Points { dim: usize, coords: Vec<Vec<f64>> },
}

impl Domain {
    pub fn len(&self) -> usize {
        match self {
            Domain::Grid { width, height } => width * height,
            Domain::Points { coords, .. } => coords.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// On-disk representation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Binary,
}

/// Functional observations: `s` subjects by `n` locations plus the domain
/// geometry and stable location identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    values: Mat,
    domain: Domain,
    location_ids: Vec<String>,
}

impl FunctionalDataset {
    /// Validates shape and finiteness. Requires at least three subjects
    /// (fewer leave no room for both a model and residual noise) and a
    /// domain whose length matches the column count.
    pub fn new(values: Mat, domain: Domain) -> Result<Self> {
        if values.rows() < 3 {
            return Err(Error::Validation(format!(
                "need at least 3 subjects, got {}",
                values.rows()
            )));
        }
        if values.cols() == 0 {
            return Err(Error::Validation("dataset has no locations".into()));
        }
        if domain.len() != values.cols() {
            return Err(Error::Validation(format!(
                "domain describes {} locations but data has {}",
                domain.len(),
                values.cols()
            )));
        }
        if let Domain::Points { dim, coords } = &domain {
            if let Some(bad) = coords.iter().position(|c| c.len() != *dim) {
                return Err(Error::Validation(format!(
                    "coordinate entry {} has {} components, expected {dim}",
                    bad + 1,
                    coords[bad].len()
                )));
            }
        }
        for i in 0..values.rows() {
            for (j, v) in values.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite value {v} at subject {}, location {}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let location_ids = (0..values.cols()).map(|j| j.to_string()).collect();
        Ok(FunctionalDataset {
            values,
            domain,
            location_ids,
        })
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn location_ids(&self) -> &[String] {
        &self.location_ids
    }

    /// Subject count `s`.
    pub fn subjects(&self) -> usize {
        self.values.rows()
    }

    /// Location count `n`.
    pub fn locations(&self) -> usize {
        self.values.cols()
    }
}

/// Model specification: interest block `X` (`s x k`), nuisance block `Z`
/// (`s x l`), and the contrast `C` (`t x k`) whose null `C b = 0` is tested.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    interest: Mat,
    nuisance: Mat,
    contrast: Mat,
}

/// Relative singular-value cutoff for all rank decisions.
const RANK_TOL: f64 = 1e-10;

impl DesignSpec {
    /// Validates shapes, ranks, and degrees of freedom.
    ///
    /// The nuisance block must contain an intercept (some constant nonzero
    /// column); passing `allow_empty_nuisance` and an `s x 0` block is the
    /// explicit way to model nothing at all under the null.
    pub fn new(interest: Mat, nuisance: Mat, contrast: Mat, allow_empty_nuisance: bool) -> Result<Self> {
        let s = interest.rows();
        let (k, l, t) = (interest.cols(), nuisance.cols(), contrast.rows());
        if k == 0 {
            return Err(Error::Validation("interest block has no columns".into()));
        }
        if l > 0 && nuisance.rows() != s {
            return Err(Error::Validation(format!(
                "interest has {s} rows but nuisance has {}",
                nuisance.rows()
            )));
        }
        if contrast.cols() != k {
            return Err(Error::Validation(format!(
                "contrast has {} columns but the interest block has {k}",
                contrast.cols()
            )));
        }
        if t == 0 || t > k {
            return Err(Error::Validation(format!(
                "contrast must have between 1 and {k} rows, got {t}"
            )));
        }
        if k + l >= s {
            return Err(Error::Validation(format!(
                "no residual degrees of freedom: {k}+{l} regressors for {s} subjects"
            )));
        }
        if l == 0 && !allow_empty_nuisance {
            return Err(Error::Validation(
                "empty nuisance block requires the explicit no-nuisance flag".into(),
            ));
        }
        if l > 0 && !has_intercept_column(&nuisance) {
            return Err(Error::Validation(
                "nuisance block must include an intercept column".into(),
            ));
        }

        // Rank checks on [X Z] and on C itself.
        let mut full = Mat::zeros(s, k + l);
        for i in 0..s {
            full.row_mut(i)[..k].copy_from_slice(interest.row(i));
            full.row_mut(i)[k..].copy_from_slice(nuisance.row(i));
        }
        if matrix_rank(&full) < k + l {
            return Err(Error::Rank(format!(
                "design matrix [X Z] is rank deficient ({} columns, rank {})",
                k + l,
                matrix_rank(&full)
            )));
        }
        if matrix_rank(&contrast) < t {
            return Err(Error::Rank(format!(
                "contrast matrix has {t} rows but rank {}",
                matrix_rank(&contrast)
            )));
        }

        Ok(DesignSpec {
            interest,
            nuisance,
            contrast,
        })
    }

    /// Two-group comparison: indicator column for the second group, intercept
    /// as nuisance, scalar contrast. The canonical smoke-test design.
    pub fn two_group(group_sizes: (usize, usize)) -> Result<Self> {
        let s = group_sizes.0 + group_sizes.1;
        let mut x = Mat::zeros(s, 1);
        for i in group_sizes.0..s {
            x[(i, 0)] = 1.0;
        }
        let z = Mat::from_vec(s, 1, vec![1.0; s]);
        let c = Mat::from_vec(1, 1, vec![1.0]);
        DesignSpec::new(x, z, c, false)
    }

    pub fn interest(&self) -> &Mat {
        &self.interest
    }

    pub fn nuisance(&self) -> &Mat {
        &self.nuisance
    }

    pub fn contrast(&self) -> &Mat {
        &self.contrast
    }

    pub fn subjects(&self) -> usize {
        self.interest.rows()
    }

    pub fn k(&self) -> usize {
        self.interest.cols()
    }

    pub fn l(&self) -> usize {
        self.nuisance.cols()
    }

    pub fn t(&self) -> usize {
        self.contrast.rows()
    }
}

fn has_intercept_column(z: &Mat) -> bool {
    'cols: for j in 0..z.cols() {
        let first = z[(0, j)];
        if first == 0.0 {
            continue;
        }
        for i in 1..z.rows() {
            if (z[(i, j)] - first).abs() > 1e-12 * first.abs() {
                continue 'cols;
            }
        }
        return true;
    }
    false
}

/// Numerical rank via singular values, cutoff `RANK_TOL * sigma_max`.
fn matrix_rank(m: &Mat) -> usize {
    if m.rows() == 0 || m.cols() == 0 {
        return 0;
    }
    let svd = m.to_nalgebra().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&sv| sv > RANK_TOL * smax).count()
}

/// Checks that a dataset and a design describe the same subjects.
pub fn validate(dataset: &FunctionalDataset, design: &DesignSpec) -> Result<()> {
    if dataset.subjects() != design.subjects() {
        return Err(Error::Validation(format!(
            "dataset has {} subjects but design has {}",
            dataset.subjects(),
            design.subjects()
        )));
    }
    Ok(())
}

/// Writes a finite `f64` so that parsing the text recovers the exact bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn load_dataset(path: &Path, format: FileFormat) -> Result<FunctionalDataset> {
    match format {
        FileFormat::Csv => load_dataset_csv(path),
        FileFormat::Binary => load_dataset_binary(path),
    }
}

pub fn save_dataset(dataset: &FunctionalDataset, path: &Path, format: FileFormat) -> Result<()> {
    match format {
        FileFormat::Csv => save_dataset_csv(dataset, path),
        FileFormat::Binary => save_dataset_binary(dataset, path),
    }
}

fn load_dataset_csv(path: &Path) -> Result<FunctionalDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut domain: Option<Domain> = None;
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(spec) = rest.strip_prefix("domain:") {
                domain = Some(parse_domain_header(path, lineno + 1, spec.trim())?);
            } else if let Some(spec) = rest.strip_prefix("coord:") {
                let entry = spec
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>().map_err(|_| {
                            Error::parse(path, lineno + 1, format!("bad coordinate '{tok}'"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                coords.push(entry);
            }
            // Other comment lines are ignored.
            continue;
        }
        if domain.is_none() {
            return Err(Error::parse(
                path,
                lineno + 1,
                "data before the '# domain:' header",
            ));
        }
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno + 1, format!("bad number '{tok}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }

    let mut domain = domain
        .ok_or_else(|| Error::parse(path, 0, "missing '# domain:' header"))?;
    if let Domain::Points { dim, coords: c } = &mut domain {
        if coords.is_empty() {
            return Err(Error::parse(
                path,
                0,
                "points domain requires '# coord:' lines",
            ));
        }
        if let Some(bad) = coords.iter().position(|e| e.len() != *dim) {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "coordinate entry {} has {} components, expected {dim}",
                    bad + 1,
                    coords[bad].len()
                ),
            ));
        }
        *c = std::mem::take(&mut coords);
    }

    if rows.is_empty() {
        return Err(Error::parse(path, 0, "no data rows"));
    }
    let n = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::parse(
            path,
            0,
            format!("row {} has {} values, expected {n}", bad + 1, rows[bad].len()),
        ));
    }
    FunctionalDataset::new(Mat::from_rows(&rows), domain)
}

fn parse_domain_header(path: &Path, lineno: usize, spec: &str) -> Result<Domain> {
    let toks: Vec<&str> = spec.split_whitespace().collect();
    match toks.as_slice() {
        ["grid", w, h] => {
            let width = w
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad grid width '{w}'")))?;
            let height = h
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad grid height '{h}'")))?;
            Ok(Domain::Grid { width, height })
        }
        ["points", d] => {
            let dim = d
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad point dimension '{d}'")))?;
            Ok(Domain::Points { dim, coords: Vec::new() })
        }
        _ => Err(Error::parse(
            path,
            lineno,
            format!("unrecognised domain header '{spec}'"),
        )),
    }
}

fn save_dataset_csv(dataset: &FunctionalDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    match dataset.domain() {
        Domain::Grid { width, height } => {
            out.push_str(&format!("# domain: grid {width} {height}\n"));
        }
        Domain::Points { dim, coords } => {
            out.push_str(&format!("# domain: points {dim}\n"));
            for c in coords {
                let toks: Vec<String> = c.iter().map(|v| fmt_f64(*v)).collect();
                out.push_str(&format!("# coord: {}\n", toks.join(" ")));
            }
        }
    }
    for i in 0..dataset.subjects() {
        let toks: Vec<String> = dataset.values().row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&toks.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn load_dataset_binary(path: &Path) -> Result<FunctionalDataset> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dims = [0u8; 16];
    file.read_exact(&mut dims).map_err(|e| Error::io(path, e))?;
    let s = u64::from_le_bytes(dims[..8].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(dims[8..].try_into().unwrap()) as usize;
    let expected = s
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::parse(path, 0, "dimension overflow"))?;
    let mut payload = vec![0u8; expected];
    file.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let mut extra = [0u8; 1];
    if file.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::parse(path, 0, "trailing bytes after payload"));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FunctionalDataset::new(
        Mat::from_vec(s, n, data),
        Domain::Grid { width: n, height: 1 },
    )
}

fn save_dataset_binary(dataset: &FunctionalDataset, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(16 + dataset.values().data().len() * 8);
    out.extend_from_slice(&(dataset.subjects() as u64).to_le_bytes());
    out.extend_from_slice(&(dataset.locations() as u64).to_le_bytes());
    for v in dataset.values().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn load_design(path: &Path) -> Result<DesignSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header: Option<(usize, usize, usize)> = None;
    let mut contrast_rows: Vec<Vec<f64>> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut no_nuisance_flag = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(spec) = rest.strip_prefix("design:") {
                let toks: Vec<&str> = spec.split_whitespace().collect();
                if toks.len() != 6 || toks[0] != "k" || toks[2] != "l" || toks[4] != "t" {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        "expected '# design: k <k> l <l> t <t>'",
                    ));
                }
                let parse = |tok: &str| {
                    tok.parse::<usize>()
                        .map_err(|_| Error::parse(path, lineno + 1, format!("bad count '{tok}'")))
                };
                header = Some((parse(toks[1])?, parse(toks[3])?, parse(toks[5])?));
            } else if let Some(spec) = rest.strip_prefix("contrast:") {
                let row = spec
                    .split(',')
                    .map(|tok| {
                        let tok = tok.trim();
                        tok.parse::<f64>().map_err(|_| {
                            Error::parse(path, lineno + 1, format!("bad contrast value '{tok}'"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                contrast_rows.push(row);
            } else if rest == "no-nuisance" {
                no_nuisance_flag = true;
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno + 1, format!("bad number '{tok}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }

    let (k, l, t) = header.ok_or_else(|| Error::parse(path, 0, "missing '# design:' header"))?;
    if contrast_rows.len() != t {
        return Err(Error::parse(
            path,
            0,
            format!("expected {t} '# contrast:' lines, found {}", contrast_rows.len()),
        ));
    }
    if let Some(bad) = contrast_rows.iter().position(|r| r.len() != k) {
        return Err(Error::parse(
            path,
            0,
            format!(
                "contrast row {} has {} values, expected {k}",
                bad + 1,
                contrast_rows[bad].len()
            ),
        ));
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 0, "no design rows"));
    }
    let s = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != k + l) {
        return Err(Error::parse(
            path,
            0,
            format!(
                "design row {} has {} values, expected {}",
                bad + 1,
                rows[bad].len(),
                k + l
            ),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite design value {v} at subject {}, column {}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }

    let mut interest = Mat::zeros(s, k);
    let mut nuisance = Mat::zeros(s, l);
    for (i, row) in rows.iter().enumerate() {
        interest.row_mut(i).copy_from_slice(&row[..k]);
        nuisance.row_mut(i).copy_from_slice(&row[k..]);
    }
    DesignSpec::new(
        interest,
        nuisance,
        Mat::from_rows(&contrast_rows),
        no_nuisance_flag,
    )
}

pub fn save_design(design: &DesignSpec, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# design: k {} l {} t {}\n",
        design.k(),
        design.l(),
        design.t()
    ));
    for i in 0..design.t() {
        let toks: Vec<String> = design.contrast().row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&format!("# contrast: {}\n", toks.join(",")));
    }
    if design.l() == 0 {
        out.push_str("# no-nuisance\n");
    }
    for i in 0..design.subjects() {
        let mut toks: Vec<String> = design.interest().row(i).iter().map(|v| fmt_f64(*v)).collect();
        toks.extend(design.nuisance().row(i).iter().map(|v| fmt_f64(*v)));
        out.push_str(&toks.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use tempfile::tempdir;

    fn write(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    #[test]
    fn csv_with_grid_header_loads_shape() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(
            &p,
            "# domain: grid 3 1\n0.1,0.2,0.3\n1,2,3\n4,5,6\n7,8,9\n",
        );
        let ds = load_dataset(&p, FileFormat::Csv).unwrap();
        assert_eq!(ds.subjects(), 4);
        assert_eq!(ds.locations(), 3);
        assert_eq!(ds.domain(), &Domain::Grid { width: 3, height: 1 });
        assert_eq!(ds.values()[(0, 1)], 0.2);
    }

    #[test]
    fn nan_is_reported_with_subject_and_location() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(&p, "# domain: grid 2 1\n1,2\nNaN,4\n5,6\n");
        let err = load_dataset(&p, FileFormat::Csv).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("subject 2"), "message was: {msg}");
        assert!(msg.contains("location 1"), "message was: {msg}");
    }

    #[test]
    fn grid_size_must_match_columns() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(&p, "# domain: grid 2 2\n1,2,3\n4,5,6\n7,8,9\n");
        assert!(load_dataset(&p, FileFormat::Csv).is_err());
    }

    #[test]
    fn points_domain_round_trips_coordinates() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let coords = vec![vec![-1.0, 0.5], vec![0.25, 0.75]];
        let ds = FunctionalDataset::new(
            Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]),
            Domain::Points { dim: 2, coords: coords.clone() },
        )
        .unwrap();
        save_dataset(&ds, &p, FileFormat::Csv).unwrap();
        let back = load_dataset(&p, FileFormat::Csv).unwrap();
        assert_eq!(back.domain(), &Domain::Points { dim: 2, coords });
        assert_eq!(back.values(), ds.values());
    }

    #[test]
    fn round_trip_is_bit_exact_for_random_matrices() {
        let dir = tempdir().unwrap();
        let mut rng = stream_rng(11, 0);
        for case in 0..20 {
            let s = rng.gen_range(3..8);
            let n = rng.gen_range(1..12);
            let data: Vec<f64> = (0..s * n)
                .map(|_| (rng.gen::<f64>() - 0.5) * 10f64.powi(rng.gen_range(-8..9)))
                .collect();
            let ds = FunctionalDataset::new(
                Mat::from_vec(s, n, data),
                Domain::Grid { width: n, height: 1 },
            )
            .unwrap();
            for (format, name) in [(FileFormat::Csv, "csv"), (FileFormat::Binary, "bin")] {
                let p = dir.path().join(format!("m{case}.{name}"));
                save_dataset(&ds, &p, format).unwrap();
                let back = load_dataset(&p, format).unwrap();
                assert_eq!(back.values().data(), ds.values().data(), "format {name}");
            }
        }
    }

    #[test]
    fn design_file_round_trips() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("design.csv");
        let design = DesignSpec::two_group((3, 3)).unwrap();
        save_design(&design, &p).unwrap();
        let back = load_design(&p).unwrap();
        assert_eq!(&back, &design);
    }

    #[test]
    fn saturated_design_reports_no_residual_dof() {
        let x = Mat::from_vec(4, 3, vec![
            1.0, 0.0, 0.0,
            0.0, 1.0, 0.0,
            0.0, 0.0, 1.0,
            0.0, 0.0, 0.0,
        ]);
        let z = Mat::from_vec(4, 1, vec![1.0; 4]);
        let c = Mat::from_vec(1, 3, vec![1.0, 0.0, 0.0]);
        let err = DesignSpec::new(x, z, c, false).unwrap_err();
        assert!(err.to_string().contains("no residual degrees of freedom"));
    }

    #[test]
    fn collinear_design_is_rejected() {
        // Second interest column equals the intercept: rank deficient.
        let x = Mat::from_vec(5, 2, vec![
            0.0, 1.0,
            0.0, 1.0,
            1.0, 1.0,
            1.0, 1.0,
            1.0, 1.0,
        ]);
        let z = Mat::from_vec(5, 1, vec![1.0; 5]);
        let c = Mat::from_vec(1, 2, vec![1.0, 0.0]);
        match DesignSpec::new(x, z, c, false) {
            Err(Error::Rank(_)) => {}
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn dependent_contrast_rows_are_rejected() {
        let x = Mat::from_vec(6, 2, vec![
            0.0, 0.0,
            0.0, 1.0,
            1.0, 0.0,
            1.0, 1.0,
            0.0, 1.0,
            1.0, 0.0,
        ]);
        let z = Mat::from_vec(6, 1, vec![1.0; 6]);
        let c = Mat::from_vec(2, 2, vec![1.0, -1.0, 2.0, -2.0]);
        match DesignSpec::new(x, z, c, false) {
            Err(Error::Rank(_)) => {}
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn missing_intercept_is_rejected_and_flag_permits_empty() {
        let x = Mat::from_vec(5, 1, vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        let z = Mat::from_vec(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let c = Mat::from_vec(1, 1, vec![1.0]);
        assert!(DesignSpec::new(x.clone(), z, c.clone(), false).is_err());
        // Empty nuisance without the flag is refused, with the flag accepted.
        let empty = Mat::zeros(5, 0);
        assert!(DesignSpec::new(x.clone(), empty.clone(), c.clone(), false).is_err());
        assert!(DesignSpec::new(x, empty, c, true).is_ok());
    }

    #[test]
    fn dataset_design_subject_counts_must_agree() {
        let ds = FunctionalDataset::new(
            Mat::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]),
            Domain::Grid { width: 1, height: 1 },
        )
        .unwrap();
        let design = DesignSpec::two_group((3, 3)).unwrap();
        assert!(validate(&ds, &design).is_err());
    }
}
