//! Key rate against fiber distance for binned arrival-time keys with a
//! frequency check basis.
//!
//! Per distance the driver builds both binned joint distributions through
//! the lossy channel, extracts a max-entropy proxy from the time data and a
//! reconciliation leak from the frequency data, and evaluates the null-aware
//! bound with the source-side null fractions. The proxy is the classical
//! max-entropy of Bob's time record given Alice kept an informative outcome,
//! which stands in for the quantum quantity; the zero-rate onset is
//! therefore a qualitative target, not a curve match.

use serde::Serialize;

use crate::bounds::{
    cond_max_entropy_classical, eur_modified, eur_modified_smooth, key_rate, BoundInput,
};
use crate::continuous::analytic_overlap;
use crate::states::{
    apply_loss_to_null_prob, joint_frequency_banded, joint_time_banded, null_prob_frequency,
    null_prob_time,
};
use crate::{Error, Result};

use super::{fmt_g17, ScenarioConfig, SourceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateRow {
    pub distance_km: f64,
    /// Bob-side time-null probability after channel loss.
    pub p_t_null_bob: f64,
    /// Classical max-entropy of Alice's informative time record given Bob's.
    pub h_max_proxy_bits: f64,
    pub raw_bound_bits: f64,
    /// Frequency-basis reconciliation cost `H(F_A|F_B)`.
    pub leak_bits: f64,
    pub key_rate_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateScanReport {
    pub c_less: f64,
    /// Source-side null fractions fed into the bound at every distance; the
    /// sender's characterization of the source does not see channel loss.
    pub p_f_null_source: f64,
    pub p_t_null_source: f64,
    pub time_bin_width: f64,
    pub frequency_bin_width: f64,
    pub smoothing_epsilon: f64,
    pub h_max_proxy_method: String,
    pub rows: Vec<KeyRateRow>,
    /// Smallest scanned distance with a vanishing key rate.
    pub first_zero_rate_km: Option<f64>,
}

impl KeyRateScanReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 140 + 96);
        out.push_str(
            "distance_km,p_t_null_bob,h_max_proxy_bits,raw_bound_bits,leak_bits,key_rate_bits\n",
        );
        for r in &self.rows {
            for (k, v) in [
                r.distance_km,
                r.p_t_null_bob,
                r.h_max_proxy_bits,
                r.raw_bound_bits,
                r.leak_bits,
                r.key_rate_bits,
            ]
            .iter()
            .enumerate()
            {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_g17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Scans the configured distance grid. The time and frequency windows must
/// both be symmetric about their carriers, matching the source models.
pub fn tf_keyrate_scan(cfg: &ScenarioConfig) -> Result<KeyRateScanReport> {
    cfg.validate()?;
    let SourceSpec::Biphoton(src) = cfg.source else {
        return Err(Error::InvalidConfig(
            "the distance scan needs a biphoton source".into(),
        ));
    };
    let (t_lo, t_hi) = cfg.time_bins.range();
    if (t_lo + t_hi).abs() > 1e-9 * (t_hi - t_lo) {
        return Err(Error::InvalidConfig(format!(
            "time window [{t_lo}, {t_hi}] must be symmetric about zero"
        )));
    }
    let (f_lo, f_hi) = cfg.frequency_bins.range();
    let p_t_null_source = null_prob_time(&src, t_hi)?;
    let p_f_null_source = null_prob_frequency(&src, f_lo, f_hi)?;
    let c_less = match cfg.c_less_override {
        Some(c) => c,
        None => analytic_overlap(cfg.frequency_bins.width(), cfg.time_bins.width())?,
    };

    let mut rows = Vec::with_capacity(cfg.distances_km.len());
    for &d in &cfg.distances_km {
        let ch = cfg.channel.at_distance(d)?;
        let p_t_null_bob = apply_loss_to_null_prob(p_t_null_source, &ch)?;

        let time_joint = joint_time_banded(&src, &cfg.time_bins, &cfg.time_bins, &ch, true)?;
        let (informative, _) = time_joint.to_dense()?.condition_on_informative_rows()?;
        let h_max_proxy = cond_max_entropy_classical(&informative);

        let freq_joint =
            joint_frequency_banded(&src, &cfg.frequency_bins, &cfg.frequency_bins, &ch, true)?;
        let leak = freq_joint.cond_shannon_bits();

        let input = BoundInput::new(p_f_null_source, p_t_null_source, c_less, h_max_proxy)?;
        let bound = if cfg.smoothing.epsilon > 0.0 {
            eur_modified_smooth(&input, &cfg.smoothing)?
        } else {
            eur_modified(&input)?
        };
        rows.push(KeyRateRow {
            distance_km: d,
            p_t_null_bob,
            h_max_proxy_bits: h_max_proxy,
            raw_bound_bits: bound.raw_bound,
            leak_bits: leak,
            key_rate_bits: key_rate(&bound, leak)?,
        });
    }
    let first_zero_rate_km = rows
        .iter()
        .find(|r| r.key_rate_bits == 0.0)
        .map(|r| r.distance_km);
    Ok(KeyRateScanReport {
        c_less,
        p_f_null_source,
        p_t_null_source,
        time_bin_width: cfg.time_bins.width(),
        frequency_bin_width: cfg.frequency_bins.width(),
        smoothing_epsilon: cfg.smoothing.epsilon,
        h_max_proxy_method: "classical conditional max-entropy of the binned time record, \
                             sender nulls excluded"
            .into(),
        rows,
        first_zero_rate_km,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::ChannelModel;

    fn short_cfg(distances: Vec<f64>) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::telecom_default();
        cfg.distances_km = distances;
        cfg
    }

    #[test]
    fn zero_distance_rate_is_positive() {
        let rep = tf_keyrate_scan(&short_cfg(vec![0.0])).unwrap();
        let r = &rep.rows[0];
        assert!(r.key_rate_bits > 0.0, "rate {}", r.key_rate_bits);
        assert!((rep.p_t_null_source - 0.0027).abs() < 2e-4);
        assert!(rep.p_f_null_source < 1e-15);
        assert!((rep.c_less - 1e-3).abs() < 1e-4);
    }

    #[test]
    fn rate_declines_with_distance_and_dies_within_window() {
        let rep = tf_keyrate_scan(&short_cfg(vec![0.0, 2.0, 5.0])).unwrap();
        let rates: Vec<f64> = rep.rows.iter().map(|r| r.key_rate_bits).collect();
        assert!(rates[0] > rates[1] || rates[1] == 0.0);
        assert!(rates[1] >= rates[2]);
        assert_eq!(rates[2], 0.0, "rate should vanish by 5 km, got {:?}", rates);
    }

    #[test]
    fn lossless_channel_row_is_distance_independent() {
        let mut cfg = short_cfg(vec![0.0, 3.0]);
        cfg.channel = ChannelModel::new(0.0, 0.0).unwrap();
        let rep = tf_keyrate_scan(&cfg).unwrap();
        assert_eq!(rep.rows[0].key_rate_bits, rep.rows[1].key_rate_bits);
        assert_eq!(rep.rows[0].h_max_proxy_bits, rep.rows[1].h_max_proxy_bits);
    }

    #[test]
    fn tmsv_source_is_rejected() {
        use crate::states::{TmsvSpec, VacuumVarianceConvention};
        let mut cfg = short_cfg(vec![0.0]);
        cfg.source = SourceSpec::Tmsv(
            TmsvSpec::new(19.3, VacuumVarianceConvention::HalfVariance).unwrap(),
        );
        assert!(tf_keyrate_scan(&cfg).is_err());
    }

    #[test]
    fn csv_has_six_columns() {
        let rep = tf_keyrate_scan(&short_cfg(vec![0.0])).unwrap();
        let csv = rep.to_csv();
        let header = csv.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 6);
        assert_eq!(csv.lines().count(), 2);
    }
}
