use serde::{Deserialize, Serialize};

/// Head-gain characteristic `H(Q, w) = w^2 (h0 - r (Q/w)^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpCurve {
    /// Shutoff head at nominal speed [ft].
    pub shutoff_head: f64,
    pub coefficient: f64,
    pub exponent: f64,
}

impl PumpCurve {
    /// Fits a curve to `(flow, head)` points.
    ///
    /// A single design point uses the EPANET convention: shutoff head is 4/3
    /// of the design head and the curve is quadratic. Several points are fitted
    /// with a power law by least squares in log space, anchored at the head for
    /// zero flow (given, or linearly extrapolated from the first two points).
    pub fn fit(points: &[(f64, f64)]) -> Result<Self, String> {
        let Some(&(q1, h1)) = points.first() else {
            return Err("pump curve has no points".into());
        };
        if points.iter().any(|(q, h)| !q.is_finite() || !h.is_finite() || *q < 0.0) {
            return Err("pump curve has invalid points".into());
        }
        if points
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0) || w[1].1 > w[0].1)
        {
            return Err("pump curve flows must increase and heads must not increase".into());
        }

        if points.len() == 1 {
            if !(q1 > 0.0 && h1 > 0.0) {
                return Err("single-point pump curve needs positive flow and head".into());
            }
            return Ok(Self {
                shutoff_head: 4.0 / 3.0 * h1,
                coefficient: h1 / (3.0 * q1 * q1),
                exponent: 2.0,
            });
        }

        let shutoff_head = if q1 == 0.0 {
            h1
        } else {
            let (q2, h2) = points[1];
            h1 + (h1 - h2) * q1 / (q2 - q1)
        };
        if !(shutoff_head > 0.0) {
            return Err("pump curve has non-positive shutoff head".into());
        }

        let samples: Vec<(f64, f64)> = points
            .iter()
            .filter(|(q, h)| *q > 0.0 && shutoff_head - h > 0.0)
            .map(|(q, h)| (q.ln(), (shutoff_head - h).ln()))
            .collect();
        let (coefficient, exponent) = match samples.len() {
            0 => (0.0, 2.0),
            1 => {
                let (lq, lh) = samples[0];
                (lh.exp() / (2.0 * lq).exp(), 2.0)
            }
            m => {
                let m = m as f64;
                let mx = samples.iter().map(|s| s.0).sum::<f64>() / m;
                let my = samples.iter().map(|s| s.1).sum::<f64>() / m;
                let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
                let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
                if sxx == 0.0 {
                    (my.exp() / (2.0 * mx).exp(), 2.0)
                } else {
                    let n = (sxy / sxx).max(1.0);
                    ((my - n * mx).exp(), n)
                }
            }
        };
        Ok(Self {
            shutoff_head,
            coefficient,
            exponent,
        })
    }

    /// Head gain [ft] at flow `q` [cfs] and relative speed `speed`.
    ///
    /// Reverse flow sees the shutoff head; gains beyond the curve's cutoff
    /// flow are clamped at zero.
    pub fn head_gain(&self, q: f64, speed: f64) -> f64 {
        let q = q.max(0.0);
        let gain = speed * speed * self.shutoff_head
            - self.coefficient * speed.powf(2.0 - self.exponent) * q.powf(self.exponent);
        gain.max(0.0)
    }

    /// `d gain / dQ` on the unclamped branch.
    pub(crate) fn head_gain_slope(&self, q: f64, speed: f64) -> f64 {
        if q <= 0.0 || self.head_gain(q, speed) <= 0.0 {
            return 0.0;
        }
        -self.coefficient * self.exponent * speed.powf(2.0 - self.exponent) * q.powf(self.exponent - 1.0)
    }

    /// Flow at which the gain equals half the shutoff head; a starting guess.
    pub(crate) fn nominal_flow(&self, speed: f64) -> f64 {
        if self.coefficient > 0.0 {
            speed * (0.5 * self.shutoff_head / self.coefficient).powf(1.0 / self.exponent)
        } else {
            1.0
        }
    }
}
