//! Parsing of traffic-count and weather CSVs, channel alignment, the dataset
//! cache format and a synthetic ARX generator.

mod align;
mod cache;
mod synth;
mod traffic;
mod weather;

pub use align::{align, align_with_report, AlignPolicy, AlignReport, RawSeries};
pub use cache::{read_cache, write_cache};
pub use synth::{companion_spectral_radius, synth_arx, synth_template_corpus, SynthArx};
pub use traffic::{load_traffic, load_traffic_raw, nyc_hour_columns, TrafficCsvSchema};
pub use weather::{
    encode_descriptions, encode_weather, load_weather_column, normalize_description,
    weather_description_series, weather_numeric_series, WeatherEncodingMap, WeatherScore,
};

/// Header names are compared after trimming, lower-casing and dropping
/// internal whitespace.
pub(crate) fn normalize_header(h: &str) -> String {
    h.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

pub(crate) fn find_column(headers: &csv::StringRecord, name: &str) -> crate::Result<usize> {
    let want = normalize_header(name);
    headers
        .iter()
        .position(|h| normalize_header(h) == want)
        .ok_or_else(|| crate::Error::SchemaMismatch(format!("missing column {name:?}")))
}
