//! Mamdani fuzzy inference engine specialized for PID gain scheduling.
//!
//! Two inputs (tracking error `e` and its change `ec`) map through a 7x7
//! rule table to three outputs: increments on the proportional, integral,
//! and derivative gains. Inference is min/max (implication by clipping,
//! aggregation by max) with discrete centroid defuzzification.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Number of linguistic terms per variable.
pub const TERM_COUNT: usize = 7;

/// Default symmetric universe half-width for all five variables.
pub const DEFAULT_UNIVERSE_HALF_WIDTH: f64 = 5.0;

/// Default number of evenly spaced points (inclusive endpoints) used by the
/// discrete centroid. 501 keeps the centroid within 0.1% of a fine-grid
/// reference.
pub const DEFAULT_DEFUZZ_RESOLUTION: usize = 501;

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("gaussian sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("triangular parameters must satisfy left <= peak <= right, got ({0}, {1}, {2})")]
    InvalidTriangle(f64, f64, f64),
    #[error("universe bounds must satisfy lo < hi, got [{0}, {1}]")]
    InvalidUniverse(f64, f64),
    #[error("variable {0}: universe not fully covered by its terms")]
    IncompleteCoverage(String),
    #[error("universe half-width must be positive and finite, got {0}")]
    InvalidHalfWidth(f64),
    #[error("defuzzification resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
    #[error("definition line {line}: {message}")]
    Definition { line: usize, message: String },
}

/// The seven linguistic terms, in fixed order across every variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermLabel {
    NB,
    NM,
    NS,
    ZO,
    PS,
    PM,
    PB,
}

impl TermLabel {
    pub const ALL: [TermLabel; TERM_COUNT] = [
        TermLabel::NB,
        TermLabel::NM,
        TermLabel::NS,
        TermLabel::ZO,
        TermLabel::PS,
        TermLabel::PM,
        TermLabel::PB,
    ];

    pub fn index(self) -> usize {
        match self {
            TermLabel::NB => 0,
            TermLabel::NM => 1,
            TermLabel::NS => 2,
            TermLabel::ZO => 3,
            TermLabel::PS => 4,
            TermLabel::PM => 5,
            TermLabel::PB => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TermLabel::NB => "NB",
            TermLabel::NM => "NM",
            TermLabel::NS => "NS",
            TermLabel::ZO => "ZO",
            TermLabel::PS => "PS",
            TermLabel::PM => "PM",
            TermLabel::PB => "PB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for TermLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gaussian or triangular membership function with degree in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction {
    Gaussian { center: f64, sigma: f64 },
    Triangular { left: f64, peak: f64, right: f64 },
}

impl MembershipFunction {
    pub fn gaussian(center: f64, sigma: f64) -> Result<Self, FuzzyError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FuzzyError::InvalidSigma(sigma));
        }
        Ok(Self::Gaussian { center, sigma })
    }

    pub fn triangular(left: f64, peak: f64, right: f64) -> Result<Self, FuzzyError> {
        if !(left <= peak && peak <= right) || left == right {
            return Err(FuzzyError::InvalidTriangle(left, peak, right));
        }
        Ok(Self::Triangular { left, peak, right })
    }

    /// Membership degree at `x`.
    pub fn degree(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { center, sigma } => {
                let z = (x - center) / sigma;
                (-0.5 * z * z).exp()
            }
            Self::Triangular { left, peak, right } => {
                if x < left || x > right {
                    0.0
                } else if x <= peak {
                    if peak == left {
                        1.0
                    } else {
                        (x - left) / (peak - left)
                    }
                } else if right == peak {
                    1.0
                } else {
                    (right - x) / (right - peak)
                }
            }
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        match *self {
            Self::Gaussian { center, sigma } => Self::Gaussian {
                center: center * factor,
                sigma: sigma * factor,
            },
            Self::Triangular { left, peak, right } => Self::Triangular {
                left: left * factor,
                peak: peak * factor,
                right: right * factor,
            },
        }
    }
}

/// A named variable over a closed universe, partitioned by the seven terms
/// NB..PB in order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticVariable {
    name: String,
    lo: f64,
    hi: f64,
    terms: [MembershipFunction; TERM_COUNT],
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        terms: [MembershipFunction; TERM_COUNT],
    ) -> Result<Self, FuzzyError> {
        let name = name.into();
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(FuzzyError::InvalidUniverse(lo, hi));
        }
        let var = Self {
            name,
            lo,
            hi,
            terms,
        };
        // Complete coverage: every point of the universe belongs to at
        // least one term.
        let probes = 101;
        for k in 0..probes {
            let x = lo + (hi - lo) * (k as f64 / (probes - 1) as f64);
            if var.terms.iter().all(|t| t.degree(x) == 0.0) {
                return Err(FuzzyError::IncompleteCoverage(var.name));
            }
        }
        Ok(var)
    }

    /// Standard input partition: gaussians at evenly spaced centers, sigma
    /// chosen so adjacent terms cross at degree 0.5.
    pub fn gaussian_partition(name: impl Into<String>, half_width: f64) -> Self {
        let spacing = half_width / 3.0;
        let sigma = spacing / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let terms = std::array::from_fn(|i| MembershipFunction::Gaussian {
            center: (i as f64 - 3.0) * spacing,
            sigma,
        });
        Self::new(name, -half_width, half_width, terms).expect("standard partition")
    }

    /// Standard output partition: triangles peaked at evenly spaced centers
    /// with feet at the neighboring centers; edge terms anchor their peak at
    /// the universe boundary.
    pub fn triangular_partition(name: impl Into<String>, half_width: f64) -> Self {
        let spacing = half_width / 3.0;
        let terms = std::array::from_fn(|i| {
            let peak = (i as f64 - 3.0) * spacing;
            MembershipFunction::Triangular {
                left: (peak - spacing).max(-half_width),
                peak,
                right: (peak + spacing).min(half_width),
            }
        });
        Self::new(name, -half_width, half_width, terms).expect("standard partition")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn term(&self, label: TermLabel) -> &MembershipFunction {
        &self.terms[label.index()]
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Membership degrees of the clamped input in every term, NB..PB order.
    pub fn fuzzify(&self, x: f64) -> [f64; TERM_COUNT] {
        let x = self.clamp(x);
        std::array::from_fn(|i| self.terms[i].degree(x))
    }

    fn rescaled(&self, factor: f64) -> Self {
        Self {
            name: self.name.clone(),
            lo: self.lo * factor,
            hi: self.hi * factor,
            terms: std::array::from_fn(|i| self.terms[i].scaled(factor)),
        }
    }
}

/// One rule cell: the consequent terms for the three gain increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleConsequent {
    pub kp: TermLabel,
    pub ki: TermLabel,
    pub kd: TermLabel,
}

/// 7x7 rule grid, indexed by (e term, ec term).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    cells: [[RuleConsequent; TERM_COUNT]; TERM_COUNT],
}

impl RuleTable {
    pub fn new(cells: [[RuleConsequent; TERM_COUNT]; TERM_COUNT]) -> Self {
        Self { cells }
    }

    /// The shipped tuning rule base.
    pub fn standard() -> Self {
        use TermLabel::*;
        const fn c(kp: TermLabel, ki: TermLabel, kd: TermLabel) -> RuleConsequent {
            RuleConsequent { kp, ki, kd }
        }
        // Rows: e from NB to PB. Columns: ec from NB to PB.
        let cells = [
            [
                c(PB, NB, PS),
                c(PB, NB, NM),
                c(PM, NB, NB),
                c(PM, NM, NB),
                c(PS, NS, NB),
                c(PS, ZO, NM),
                c(ZO, ZO, PS),
            ],
            [
                c(PB, NB, PS),
                c(PB, NB, NS),
                c(PM, NM, NB),
                c(PS, NS, NM),
                c(PS, NS, NM),
                c(ZO, ZO, NS),
                c(NS, ZO, PS),
            ],
            [
                c(PM, NB, ZO),
                c(PM, NM, NS),
                c(PM, NS, NM),
                c(PS, NS, NM),
                c(ZO, ZO, NS),
                c(NS, PS, NS),
                c(NM, PS, ZO),
            ],
            [
                c(PM, NM, ZO),
                c(PM, NS, NS),
                c(PS, NS, NS),
                c(ZO, ZO, NS),
                c(NS, PS, NS),
                c(NM, PM, NS),
                c(NM, PM, ZO),
            ],
            [
                c(PS, NS, ZO),
                c(PS, NS, NS),
                c(ZO, ZO, ZO),
                c(NS, PS, ZO),
                c(NS, PS, ZO),
                c(NM, PM, ZO),
                c(NM, PB, PS),
            ],
            [
                c(ZO, ZO, PB),
                c(ZO, ZO, NS),
                c(NS, PS, PS),
                c(NM, PS, PS),
                c(NM, PM, PS),
                c(NM, PB, PS),
                c(NB, PB, PB),
            ],
            [
                c(ZO, ZO, PB),
                c(NS, ZO, PM),
                c(NM, PS, PM),
                c(NM, PM, PM),
                c(NM, PB, PS),
                c(NB, PB, PS),
                c(NB, PB, PB),
            ],
        ];
        Self { cells }
    }

    pub fn cell(&self, e: TermLabel, ec: TermLabel) -> RuleConsequent {
        self.cells[e.index()][ec.index()]
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        Self::standard()
    }
}

/// Crisp gain increments produced by one inference step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainIncrements {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Inference result. `degenerate` is set when an output channel had zero
/// aggregated membership mass (guarded; cannot occur with complete
/// coverage) and the channel was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceOutput {
    pub increments: GainIncrements,
    pub degenerate: bool,
}

/// Complete two-input, three-output Mamdani system.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyInferenceSystem {
    input_e: LinguisticVariable,
    input_ec: LinguisticVariable,
    output_kp: LinguisticVariable,
    output_ki: LinguisticVariable,
    output_kd: LinguisticVariable,
    rules: RuleTable,
    defuzz_resolution: usize,
}

impl FuzzyInferenceSystem {
    /// The shipped system: all universes [-5, 5], gaussian inputs,
    /// triangular outputs, standard rule table, 501-point defuzzification.
    pub fn standard() -> Self {
        let hw = DEFAULT_UNIVERSE_HALF_WIDTH;
        Self {
            input_e: LinguisticVariable::gaussian_partition("e", hw),
            input_ec: LinguisticVariable::gaussian_partition("ec", hw),
            output_kp: LinguisticVariable::triangular_partition("kp", hw),
            output_ki: LinguisticVariable::triangular_partition("ki", hw),
            output_kd: LinguisticVariable::triangular_partition("kd", hw),
            rules: RuleTable::standard(),
            defuzz_resolution: DEFAULT_DEFUZZ_RESOLUTION,
        }
    }

    pub fn new(
        input_e: LinguisticVariable,
        input_ec: LinguisticVariable,
        output_kp: LinguisticVariable,
        output_ki: LinguisticVariable,
        output_kd: LinguisticVariable,
        rules: RuleTable,
        defuzz_resolution: usize,
    ) -> Result<Self, FuzzyError> {
        if defuzz_resolution < 2 {
            return Err(FuzzyError::InvalidResolution(defuzz_resolution));
        }
        Ok(Self {
            input_e,
            input_ec,
            output_kp,
            output_ki,
            output_kd,
            rules,
            defuzz_resolution,
        })
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }

    pub fn input_e(&self) -> &LinguisticVariable {
        &self.input_e
    }

    pub fn input_ec(&self) -> &LinguisticVariable {
        &self.input_ec
    }

    pub fn output(&self, channel: usize) -> &LinguisticVariable {
        match channel {
            0 => &self.output_kp,
            1 => &self.output_ki,
            2 => &self.output_kd,
            _ => panic!("channel out of range"),
        }
    }

    /// Half-width of the output universes, which bounds every increment.
    pub fn output_half_width(&self) -> f64 {
        self.output_kp.hi
    }

    pub fn defuzz_resolution(&self) -> usize {
        self.defuzz_resolution
    }

    /// Returns a system with every membership parameter and universe bound
    /// multiplied by `new_half_width / current_half_width`. The rule table
    /// is unchanged.
    pub fn rescale_universe(&self, new_half_width: f64) -> Result<Self, FuzzyError> {
        if !(new_half_width > 0.0 && new_half_width.is_finite()) {
            return Err(FuzzyError::InvalidHalfWidth(new_half_width));
        }
        let factor = new_half_width / self.input_e.hi;
        Ok(Self {
            input_e: self.input_e.rescaled(factor),
            input_ec: self.input_ec.rescaled(factor),
            output_kp: self.output_kp.rescaled(factor),
            output_ki: self.output_ki.rescaled(factor),
            output_kd: self.output_kd.rescaled(factor),
            rules: self.rules.clone(),
            defuzz_resolution: self.defuzz_resolution,
        })
    }

    /// Runs one min/max Mamdani inference and defuzzifies each output
    /// channel by discrete centroid.
    pub fn infer(&self, e: f64, ec: f64) -> InferenceOutput {
        let mu_e = self.input_e.fuzzify(e);
        let mu_ec = self.input_ec.fuzzify(ec);

        // Firing strength of each of the 49 rules; rules sharing a
        // consequent term are merged by max before clipping, which is
        // algebraically identical to aggregating them separately.
        let mut strength_kp = [0.0f64; TERM_COUNT];
        let mut strength_ki = [0.0f64; TERM_COUNT];
        let mut strength_kd = [0.0f64; TERM_COUNT];
        for (i, &me) in mu_e.iter().enumerate() {
            for (j, &mec) in mu_ec.iter().enumerate() {
                let w = me.min(mec);
                let cell = self.rules.cells[i][j];
                let kp = &mut strength_kp[cell.kp.index()];
                *kp = kp.max(w);
                let ki = &mut strength_ki[cell.ki.index()];
                *ki = ki.max(w);
                let kd = &mut strength_kd[cell.kd.index()];
                *kd = kd.max(w);
            }
        }

        let mut degenerate = false;
        let kp = self.defuzzify(&self.output_kp, &strength_kp, &mut degenerate);
        let ki = self.defuzzify(&self.output_ki, &strength_ki, &mut degenerate);
        let kd = self.defuzzify(&self.output_kd, &strength_kd, &mut degenerate);

        InferenceOutput {
            increments: GainIncrements { kp, ki, kd },
            degenerate,
        }
    }

    fn defuzzify(
        &self,
        var: &LinguisticVariable,
        strengths: &[f64; TERM_COUNT],
        degenerate: &mut bool,
    ) -> f64 {
        let n = self.defuzz_resolution;
        let (lo, hi) = (var.lo, var.hi);
        let span = hi - lo;
        let mut moment = 0.0;
        let mut mass = 0.0;
        for k in 0..n {
            let x = lo + span * (k as f64 / (n - 1) as f64);
            let mut mu = 0.0f64;
            for (t, &s) in strengths.iter().enumerate() {
                if s > 0.0 {
                    mu = mu.max(s.min(var.terms[t].degree(x)));
                }
            }
            // Trapezoid end weights; edge-shouldered terms carry real mass
            // at the boundary and plain summation would over-count it.
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            moment += w * x * mu;
            mass += w * mu;
        }
        if mass <= 0.0 {
            *degenerate = true;
            return 0.0;
        }
        (moment / mass).clamp(lo, hi)
    }

    /// Renders the whole system (universes, membership parameters, rule
    /// table, resolution) as a line-oriented text definition. Numbers use
    /// the shortest round-trippable decimal form, so loading the output
    /// reproduces the system bit-exactly.
    pub fn to_definition(&self) -> String {
        let mut out = String::new();
        out.push_str("# fuzzy gain-scheduling system definition\n");
        out.push_str(&format!("resolution {}\n", self.defuzz_resolution));
        for var in [
            &self.input_e,
            &self.input_ec,
            &self.output_kp,
            &self.output_ki,
            &self.output_kd,
        ] {
            out.push_str(&format!("variable {} {} {}\n", var.name, var.lo, var.hi));
            for label in TermLabel::ALL {
                match *var.term(label) {
                    MembershipFunction::Gaussian { center, sigma } => {
                        out.push_str(&format!(
                            "mf {} {} gaussian {} {}\n",
                            var.name, label, center, sigma
                        ));
                    }
                    MembershipFunction::Triangular { left, peak, right } => {
                        out.push_str(&format!(
                            "mf {} {} triangular {} {} {}\n",
                            var.name, label, left, peak, right
                        ));
                    }
                }
            }
        }
        for e in TermLabel::ALL {
            for ec in TermLabel::ALL {
                let cell = self.rules.cell(e, ec);
                out.push_str(&format!(
                    "rule {} {} {} {} {}\n",
                    e, ec, cell.kp, cell.ki, cell.kd
                ));
            }
        }
        out
    }

    /// Parses a definition produced by [`Self::to_definition`] (or written
    /// by hand in the same format).
    pub fn from_definition(text: &str) -> Result<Self, FuzzyError> {
        fn err(line: usize, message: impl Into<String>) -> FuzzyError {
            FuzzyError::Definition {
                line,
                message: message.into(),
            }
        }
        fn parse_f64(line: usize, tok: &str) -> Result<f64, FuzzyError> {
            tok.parse::<f64>()
                .map_err(|_| err(line, format!("invalid number `{tok}`")))
        }

        let mut resolution = DEFAULT_DEFUZZ_RESOLUTION;
        let mut bounds: HashMap<String, (f64, f64)> = HashMap::new();
        let mut mfs: HashMap<(String, TermLabel), MembershipFunction> = HashMap::new();
        let mut rules: HashMap<(TermLabel, TermLabel), RuleConsequent> = HashMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "resolution" => {
                    if tokens.len() != 2 {
                        return Err(err(lineno, "expected: resolution <n>"));
                    }
                    resolution = tokens[1]
                        .parse()
                        .map_err(|_| err(lineno, "invalid resolution"))?;
                }
                "variable" => {
                    if tokens.len() != 4 {
                        return Err(err(lineno, "expected: variable <name> <lo> <hi>"));
                    }
                    let lo = parse_f64(lineno, tokens[2])?;
                    let hi = parse_f64(lineno, tokens[3])?;
                    bounds.insert(tokens[1].to_string(), (lo, hi));
                }
                "mf" => {
                    if tokens.len() < 5 {
                        return Err(err(lineno, "expected: mf <var> <term> <kind> <params...>"));
                    }
                    let label = TermLabel::parse(tokens[2])
                        .ok_or_else(|| err(lineno, format!("unknown term `{}`", tokens[2])))?;
                    let mf = match tokens[3] {
                        "gaussian" => {
                            if tokens.len() != 6 {
                                return Err(err(lineno, "gaussian takes <center> <sigma>"));
                            }
                            MembershipFunction::gaussian(
                                parse_f64(lineno, tokens[4])?,
                                parse_f64(lineno, tokens[5])?,
                            )?
                        }
                        "triangular" => {
                            if tokens.len() != 7 {
                                return Err(err(lineno, "triangular takes <left> <peak> <right>"));
                            }
                            MembershipFunction::triangular(
                                parse_f64(lineno, tokens[4])?,
                                parse_f64(lineno, tokens[5])?,
                                parse_f64(lineno, tokens[6])?,
                            )?
                        }
                        other => return Err(err(lineno, format!("unknown mf kind `{other}`"))),
                    };
                    mfs.insert((tokens[1].to_string(), label), mf);
                }
                "rule" => {
                    if tokens.len() != 6 {
                        return Err(err(lineno, "expected: rule <e> <ec> <kp> <ki> <kd>"));
                    }
                    let mut labels = [TermLabel::ZO; 5];
                    for (slot, tok) in labels.iter_mut().zip(&tokens[1..6]) {
                        *slot = TermLabel::parse(tok)
                            .ok_or_else(|| err(lineno, format!("unknown term `{tok}`")))?;
                    }
                    let key = (labels[0], labels[1]);
                    if rules
                        .insert(
                            key,
                            RuleConsequent {
                                kp: labels[2],
                                ki: labels[3],
                                kd: labels[4],
                            },
                        )
                        .is_some()
                    {
                        return Err(err(
                            lineno,
                            format!("duplicate rule for ({}, {})", labels[0], labels[1]),
                        ));
                    }
                }
                other => return Err(err(lineno, format!("unknown record `{other}`"))),
            }
        }

        let mut variables = Vec::with_capacity(5);
        for name in ["e", "ec", "kp", "ki", "kd"] {
            let &(lo, hi) = bounds
                .get(name)
                .ok_or_else(|| err(0, format!("missing variable `{name}`")))?;
            let mut terms = [MembershipFunction::Gaussian {
                center: 0.0,
                sigma: 1.0,
            }; TERM_COUNT];
            for label in TermLabel::ALL {
                terms[label.index()] = *mfs
                    .get(&(name.to_string(), label))
                    .ok_or_else(|| err(0, format!("missing mf for {name}/{label}")))?;
            }
            variables.push(LinguisticVariable::new(name, lo, hi, terms)?);
        }
        let mut cells = [[RuleConsequent {
            kp: TermLabel::ZO,
            ki: TermLabel::ZO,
            kd: TermLabel::ZO,
        }; TERM_COUNT]; TERM_COUNT];
        for e in TermLabel::ALL {
            for ec in TermLabel::ALL {
                cells[e.index()][ec.index()] = *rules
                    .get(&(e, ec))
                    .ok_or_else(|| err(0, format!("missing rule for ({e}, {ec})")))?;
            }
        }

        let mut vars = variables.into_iter();
        Self::new(
            vars.next().unwrap(),
            vars.next().unwrap(),
            vars.next().unwrap(),
            vars.next().unwrap(),
            vars.next().unwrap(),
            RuleTable::new(cells),
            resolution,
        )
    }
}

impl Default for FuzzyInferenceSystem {
    fn default() -> Self {
        Self::standard()
    }
}
