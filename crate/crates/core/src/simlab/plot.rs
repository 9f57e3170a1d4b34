use serde_json::{json, Value};

use super::monte_carlo::SimReport;

/// Declarative Vega-Lite description of bias, RMSE and coverage against `n`,
/// one colour per method, with the cell table inlined as data.
pub fn plot_spec(report: &SimReport) -> Value {
    let panel = |field: &str, title: &str, log_y: bool, rule: Option<f64>| {
        let y = if log_y {
            json!({"field": field, "type": "quantitative", "title": title, "scale": {"type": "log"}})
        } else {
            json!({"field": field, "type": "quantitative", "title": title})
        };
        let mut layers = vec![json!({
            "mark": {"type": "line", "point": true},
            "encoding": {
                "x": {"field": "n", "type": "quantitative", "scale": {"type": "log"}},
                "y": y,
                "color": {"field": "method", "type": "nominal"}
            }
        })];
        if let Some(v) = rule {
            layers.push(json!({"mark": {"type": "rule", "strokeDash": [4, 4]}, "encoding": {"y": {"datum": v}}}));
        }
        json!({"title": title, "layer": layers})
    };
    json!({
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "description": format!("{} DGP, {} replications per cell", report.dgp.variant_name(), report.replications),
        "data": {"values": report.cells},
        "vconcat": [
            panel("bias", "bias", false, Some(0.0)),
            panel("rmse", "RMSE", true, None),
            panel("coverage", "95% CI coverage", false, Some(0.95)),
        ]
    })
}
