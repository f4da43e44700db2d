//! Point series for plotting, one file per series with columns `re, im, label`.

use blocktoep::C64;
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<C64>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: impl IntoIterator<Item = C64>) -> Self {
        Self {
            label: label.into(),
            points: points.into_iter().collect(),
        }
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("series_{}.{}", self.label, format.extension())
    }

    /// An empty series still yields a file: the CSV header, or `[]`.
    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => {
                let mut s = String::from("re,im,label\n");
                for p in &self.points {
                    s.push_str(&format!("{:.17e},{:.17e},{}\n", p.re, p.im, self.label));
                }
                s.into_bytes()
            }
            Format::Json => {
                let rows: Vec<_> = self
                    .points
                    .iter()
                    .map(|p| json!({"re": p.re, "im": p.im, "label": self.label}))
                    .collect();
                let mut bytes = serde_json::to_vec_pretty(&rows).expect("rows serialize");
                bytes.push(b'\n');
                bytes
            }
        }
    }
}

/// Sorts by real part, then imaginary part, so dense and FFT spectra list
/// in the same order.
pub fn sort_points(points: &mut [C64]) {
    points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}
