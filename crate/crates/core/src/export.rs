//! External representations of a summary: the summary document, per-group
//! render buffers, and a compact little-endian binary form of the buffers.
//!
//! The summary document names series by id; render buffers carry the
//! polylines and grids a client needs to draw each chart without
//! recomputing anything.

use serde::{Deserialize, Serialize};

use crate::model::{
    Band, DensityGrid, GroupStats, IntervalPartition, PartitionError, Pattern, SubsequenceGroup, SummaryArtifact,
    SummaryParams, TimeSeriesDataset,
};
use crate::pipeline::StageTimings;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExportError {
    #[error("unknown series id {0:?}")]
    UnknownSeries(String),
    #[error("summary has {groups} groups but render buffers have {buffers}")]
    GroupCount { groups: usize, buffers: usize },
    #[error("partition boundaries are malformed: {0}")]
    Partition(String),
    #[error("truncated render buffer at byte {0}")]
    Truncated(usize),
    #[error(transparent)]
    Partitioning(#[from] PartitionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub params: SummaryParams,
    /// Interval start samples followed by the series length.
    pub partition: Vec<usize>,
    pub groups: Vec<GroupEntry>,
    pub ordering: Vec<usize>,
    pub coverage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingsEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub id: usize,
    pub pattern: Pattern,
    /// Series ids of the members.
    pub members: Vec<String>,
    pub interval_range: (usize, usize),
    pub stats: StatsEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsEntry {
    pub medoid_id: String,
    pub size: usize,
}

/// Stage wall times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingsEntry {
    pub clustering: f64,
    pub mining: f64,
    pub extraction: f64,
    pub stats: f64,
    pub search: f64,
}

impl From<StageTimings> for TimingsEntry {
    fn from(t: StageTimings) -> Self {
        Self {
            clustering: t.clustering.as_secs_f64(),
            mining: t.mining.as_secs_f64(),
            extraction: t.extraction.as_secs_f64(),
            stats: t.stats.as_secs_f64(),
            search: t.search.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderBuffers {
    pub groups: Vec<GroupRender>,
}

/// Everything needed to draw one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRender {
    pub id: usize,
    /// Sample range `[start, end)` of the chart.
    pub samples: (usize, usize),
    /// Time stamps of the samples in range.
    pub time: Vec<f64>,
    /// Medoid values over the range.
    pub medoid: Vec<f64>,
    pub band_full: Band,
    pub band_q90: Band,
    pub density: DensityGrid,
}

fn series_id(ds: &TimeSeriesDataset, i: usize) -> String {
    ds.series_ids()[i].clone()
}

/// Summary document of `artifact`, naming series by their ids in `ds`.
pub fn summary_document(
    artifact: &SummaryArtifact,
    ds: &TimeSeriesDataset,
    timings: Option<StageTimings>,
) -> SummaryDocument {
    let mut partition = artifact.partition.boundaries().to_vec();
    partition.push(artifact.partition.series_len());
    let groups = artifact
        .groups
        .iter()
        .zip(&artifact.stats)
        .enumerate()
        .map(|(id, (g, s))| GroupEntry {
            id,
            pattern: g.pattern.clone(),
            members: g.members.iter().map(|&m| series_id(ds, m)).collect(),
            interval_range: g.interval_range,
            stats: StatsEntry {
                medoid_id: series_id(ds, s.medoid_index),
                size: s.size,
            },
        })
        .collect();
    SummaryDocument {
        params: artifact.params.clone(),
        partition,
        groups,
        ordering: artifact.ordering.clone(),
        coverage: artifact.coverage,
        quality: artifact.quality,
        timings: timings.map(Into::into),
    }
}

/// Render buffers of every group, in group order.
pub fn render_buffers(artifact: &SummaryArtifact, ds: &TimeSeriesDataset) -> RenderBuffers {
    let groups = artifact
        .stats
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let range = artifact.sample_range(id);
            GroupRender {
                id,
                samples: (range.start, range.end),
                time: ds.time_axis()[range.clone()].to_vec(),
                medoid: ds.segment(s.medoid_index, range).to_vec(),
                band_full: s.band_full.clone(),
                band_q90: s.band_q90.clone(),
                density: s.density.clone(),
            }
        })
        .collect();
    RenderBuffers { groups }
}

/// Rebuilds the artifact from its two external documents. `series_ids` maps
/// ids back to indices.
pub fn decode_artifact(
    doc: &SummaryDocument,
    render: &RenderBuffers,
    series_ids: &[String],
) -> Result<SummaryArtifact, ExportError> {
    if doc.groups.len() != render.groups.len() {
        return Err(ExportError::GroupCount {
            groups: doc.groups.len(),
            buffers: render.groups.len(),
        });
    }
    let index = |id: &str| {
        series_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| ExportError::UnknownSeries(id.to_string()))
    };
    let base = doc.params.window_size;
    let mut runs = Vec::new();
    for w in doc.partition.windows(2) {
        let len = w[1].checked_sub(w[0]).filter(|&d| base > 0 && d % base == 0);
        match len {
            Some(d) => runs.push(d / base),
            None => return Err(ExportError::Partition(format!("{:?}", doc.partition))),
        }
    }
    let partition = IntervalPartition::from_runs(base, &runs)?;
    let mut groups = Vec::with_capacity(doc.groups.len());
    let mut stats = Vec::with_capacity(doc.groups.len());
    for (g, r) in doc.groups.iter().zip(&render.groups) {
        let members = g.members.iter().map(|m| index(m)).collect::<Result<Vec<_>, _>>()?;
        groups.push(SubsequenceGroup::new(g.pattern.clone(), members));
        stats.push(GroupStats {
            medoid_index: index(&g.stats.medoid_id)?,
            band_full: r.band_full.clone(),
            band_q90: r.band_q90.clone(),
            density: r.density.clone(),
            size: g.stats.size,
        });
    }
    Ok(SummaryArtifact {
        groups,
        stats,
        ordering: doc.ordering.clone(),
        coverage: doc.coverage,
        partition,
        params: doc.params.clone(),
        quality: doc.quality,
    })
}

// Binary layout: u32 group count, then per group the arrays
// [id, start, end], time, medoid, full lo, full hi, q90 lo, q90 hi,
// [rows, cols, t_min, t_max, v_min, v_max], density counts. Every array is a
// u32 element count followed by that many f32 values; all little-endian.
const ARRAYS_PER_GROUP: usize = 9;

fn put_array(out: &mut Vec<u8>, values: impl ExactSizeIterator<Item = f64>) {
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Compact binary form of the render buffers.
pub fn encode_render_binary(render: &RenderBuffers) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(render.groups.len() as u32).to_le_bytes());
    for g in &render.groups {
        put_array(&mut out, [g.id as f64, g.samples.0 as f64, g.samples.1 as f64].into_iter());
        put_array(&mut out, g.time.iter().copied());
        put_array(&mut out, g.medoid.iter().copied());
        put_array(&mut out, g.band_full.lo.iter().copied());
        put_array(&mut out, g.band_full.hi.iter().copied());
        put_array(&mut out, g.band_q90.lo.iter().copied());
        put_array(&mut out, g.band_q90.hi.iter().copied());
        let d = &g.density;
        put_array(
            &mut out,
            [d.rows as f64, d.cols as f64, d.t_min, d.t_max, d.v_min, d.v_max].into_iter(),
        );
        put_array(&mut out, d.counts.iter().map(|&c| f64::from(c)));
    }
    out
}

/// Splits a binary render buffer back into per-group arrays of f32 values,
/// in the order they were written.
pub fn decode_render_binary(bytes: &[u8]) -> Result<Vec<Vec<Vec<f32>>>, ExportError> {
    let mut pos = 0;
    let word = |pos: &mut usize| -> Result<[u8; 4], ExportError> {
        let w = bytes
            .get(*pos..*pos + 4)
            .ok_or(ExportError::Truncated(*pos))?
            .try_into()
            .expect("four bytes");
        *pos += 4;
        Ok(w)
    };
    let count = u32::from_le_bytes(word(&mut pos)?) as usize;
    let mut groups = Vec::with_capacity(count);
    for _ in 0..count {
        let mut arrays = Vec::with_capacity(ARRAYS_PER_GROUP);
        for _ in 0..ARRAYS_PER_GROUP {
            let len = u32::from_le_bytes(word(&mut pos)?) as usize;
            let mut a = Vec::with_capacity(len);
            for _ in 0..len {
                a.push(f32::from_le_bytes(word(&mut pos)?));
            }
            arrays.push(a);
        }
        groups.push(arrays);
    }
    if pos != bytes.len() {
        return Err(ExportError::Truncated(pos));
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::summarize;
    use crate::synthetic::{six_class_dataset, DurationMix, ShapeConfig};

    fn artifact() -> (SummaryArtifact, TimeSeriesDataset) {
        let cfg = ShapeConfig {
            noise: 0.05,
            ..ShapeConfig::default()
        };
        let data = six_class_dataset(DurationMix::Halves, 40, 12, &cfg, 3);
        let params = SummaryParams {
            window_size: 10,
            minsup: 6,
            seed: 1,
            density_rows: 8,
            ..SummaryParams::default()
        };
        (summarize(&data.dataset, &params).unwrap(), data.dataset)
    }

    fn close(a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
    }

    fn bands_close(a: &Band, b: &Band) -> bool {
        a.lo.len() == b.lo.len()
            && a.lo.iter().zip(&b.lo).all(|(x, y)| close(*x, *y))
            && a.hi.iter().zip(&b.hi).all(|(x, y)| close(*x, *y))
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let (a, ds) = artifact();
        assert!(!a.groups.is_empty());
        let doc = summary_document(&a, &ds, None);
        let render = render_buffers(&a, &ds);
        let doc_text = serde_json::to_string(&doc).unwrap();
        let render_text = serde_json::to_string(&render).unwrap();
        let doc2: SummaryDocument = serde_json::from_str(&doc_text).unwrap();
        let render2: RenderBuffers = serde_json::from_str(&render_text).unwrap();
        let back = decode_artifact(&doc2, &render2, ds.series_ids()).unwrap();

        assert_eq!(back.groups, a.groups);
        assert_eq!(back.ordering, a.ordering);
        assert_eq!(back.partition, a.partition);
        assert_eq!(back.params, a.params);
        assert!(close(back.coverage, a.coverage));
        for (x, y) in back.stats.iter().zip(&a.stats) {
            assert_eq!(x.medoid_index, y.medoid_index);
            assert_eq!(x.size, y.size);
            assert!(bands_close(&x.band_full, &y.band_full));
            assert!(bands_close(&x.band_q90, &y.band_q90));
            assert_eq!(x.density.counts, y.density.counts);
            assert!(close(x.density.v_min, y.density.v_min) && close(x.density.v_max, y.density.v_max));
        }
    }

    #[test]
    fn document_shape() {
        let (a, ds) = artifact();
        let doc = summary_document(&a, &ds, None);
        let v = serde_json::to_value(&doc).unwrap();
        for key in ["params", "partition", "groups", "ordering", "coverage"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v.get("timings").is_none());
        let g = &v["groups"][0];
        for key in ["id", "pattern", "members", "interval_range", "stats"] {
            assert!(g.get(key).is_some(), "missing group field {key}");
        }
        assert!(g["stats"]["medoid_id"].is_string());
        assert_eq!(v["partition"], serde_json::json!([0, 10, 20, 30, 40]));
        let timed = summary_document(&a, &ds, Some(StageTimings::default()));
        assert!(serde_json::to_value(&timed).unwrap().get("timings").is_some());
    }

    #[test]
    fn binary_buffers_decode_to_f32_arrays() {
        let (a, ds) = artifact();
        let render = render_buffers(&a, &ds);
        let bytes = encode_render_binary(&render);
        let groups = decode_render_binary(&bytes).unwrap();
        assert_eq!(groups.len(), render.groups.len());
        for (arrays, g) in groups.iter().zip(&render.groups) {
            assert_eq!(arrays[0], vec![g.id as f32, g.samples.0 as f32, g.samples.1 as f32]);
            assert_eq!(arrays[2], g.medoid.iter().map(|&v| v as f32).collect::<Vec<_>>());
            assert_eq!(arrays[7][..2], [g.density.rows as f32, g.density.cols as f32]);
            assert_eq!(arrays[8].len(), g.density.rows * g.density.cols);
        }
        // Hand-checked prefix: group count then the first array length.
        assert_eq!(bytes[..4], (render.groups.len() as u32).to_le_bytes());
        assert_eq!(bytes[4..8], 3u32.to_le_bytes());
        assert!(decode_render_binary(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let (a, ds) = artifact();
        let doc = summary_document(&a, &ds, None);
        let render = render_buffers(&a, &ds);
        let gone = &doc.groups[0].members[0];
        let ids: Vec<String> = ds.series_ids().iter().filter(|s| *s != gone).cloned().collect();
        assert_eq!(
            decode_artifact(&doc, &render, &ids).unwrap_err(),
            ExportError::UnknownSeries(gone.clone())
        );
    }
}
