//! Published reference results quoted verbatim in reports. These are static
//! strings, never recomputed, and every row rendered from them carries the
//! "paper-reported" label. Values are velocity / body-rate mean squared
//! errors at horizons of 0.01, 0.45 and 0.90 seconds.

pub const REFERENCE_LABEL: &str = "paper-reported";

/// One model row of the multi-step prediction summary.
#[derive(Debug, Clone, Copy)]
pub struct HorizonReference {
    pub model: &'static str,
    /// (velocity, body rate) MSE at t = 0.01 s.
    pub t001: (&'static str, &'static str),
    /// (velocity, body rate) MSE at t = 0.45 s.
    pub t045: (&'static str, &'static str),
    /// (velocity, body rate) MSE at t = 0.90 s.
    pub t090: (&'static str, &'static str),
}

pub const HORIZON_REFERENCES: [HorizonReference; 6] = [
    HorizonReference {
        model: "Physics-based",
        t001: ("0.00003", "0.000572"),
        t045: ("0.0892", "0.0981"),
        t090: ("0.938", "1.08"),
    },
    HorizonReference {
        model: "LSTM Hybrid",
        t001: ("0.00441", "0.616"),
        t045: ("0.0217", "2.30"),
        t090: ("0.0384", "3.01"),
    },
    HorizonReference {
        model: "Motor-Hybrid",
        t001: ("0.0100", "0.00543"),
        t045: ("0.115", "0.269"),
        t090: ("0.115", "0.632"),
    },
    HorizonReference {
        model: "AccelError-Hybrid",
        t001: ("0.0153", "0.00356"),
        t045: ("0.200", "0.187"),
        t090: ("0.205", "0.625"),
    },
    HorizonReference {
        model: "Combined-Hybrid",
        t001: ("0.0124", "0.0126"),
        t045: ("0.178", "0.535"),
        t090: ("0.192", "1.02"),
    },
    HorizonReference {
        model: "End2End-TCN",
        t001: ("0.000735", "0.00197"),
        t045: ("0.00881", "0.0352"),
        t090: ("0.0357", "0.0464"),
    },
];

/// One row of the published model-size study.
#[derive(Debug, Clone, Copy)]
pub struct ScalingReference {
    pub layers: usize,
    pub params: &'static str,
    pub fps: &'static str,
    /// (velocity, body rate) MSE at t = 0.45 s.
    pub t045: (&'static str, &'static str),
    /// (velocity, body rate) MSE at t = 0.90 s.
    pub t090: (&'static str, &'static str),
}

pub const SCALING_REFERENCES: [ScalingReference; 4] = [
    ScalingReference {
        layers: 5,
        params: "298346",
        fps: "492.6",
        t045: ("0.0102", "0.0387"),
        t090: ("0.0423", "0.0634"),
    },
    ScalingReference {
        layers: 8,
        params: "1166794",
        fps: "383.7",
        t045: ("0.0088", "0.0352"),
        t090: ("0.0357", "0.0464"),
    },
    ScalingReference {
        layers: 10,
        params: "4640266",
        fps: "302.4",
        t045: ("0.0087", "0.0403"),
        t090: ("0.0353", "0.0663"),
    },
    ScalingReference {
        layers: 12,
        params: "18517706",
        fps: "243.7",
        t045: ("0.0148", "0.0398"),
        t090: ("0.0412", "0.0654"),
    },
];

/// One row of the published architecture ablation study.
#[derive(Debug, Clone, Copy)]
pub struct AblationReference {
    /// Switch label, e.g. "BN+SG".
    pub variant: &'static str,
    pub velocity: &'static str,
    pub body_rate: &'static str,
}

pub const ABLATION_REFERENCES: [AblationReference; 6] = [
    AblationReference {
        variant: "none",
        velocity: "0.0198",
        body_rate: "0.0715",
    },
    AblationReference {
        variant: "BN",
        velocity: "0.0172",
        body_rate: "0.0401",
    },
    AblationReference {
        variant: "BN+Drop",
        velocity: "0.0217",
        body_rate: "0.0433",
    },
    AblationReference {
        variant: "BN+SG",
        velocity: "0.0329",
        body_rate: "0.0440",
    },
    AblationReference {
        variant: "BN+WL2",
        velocity: "0.0317",
        body_rate: "0.0700",
    },
    AblationReference {
        variant: "BN+L1",
        velocity: "0.0158",
        body_rate: "0.0396",
    },
];
