use std::fmt;

use super::Scenario;

/// Bytes sent to the server for one identification.
///
/// Individual: `(N·h·w + (N·k + k − 1)(h + w)) · bytes`.
/// Common: `(h·w + (2k − 1)(h + w)) · bytes`, independent of `N`.
pub fn payload_size(scenario: Scenario, n: u64, h: u64, w: u64, k: u64, bytes_per_pixel: u64) -> u64 {
    let pixels = match scenario {
        Scenario::Individual => n * h * w + (n * k + k - 1) * (h + w),
        Scenario::Common => h * w + (2 * k - 1) * (h + w),
    };
    pixels * bytes_per_pixel
}

/// `(per_n · N + constant) · unit`, with `unit` either `hw` or `(h+w)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EquationCount {
    pub per_n: u64,
    pub constant: u64,
    pub unit: &'static str,
    unit_value: u64,
}

impl EquationCount {
    fn new(per_n: u64, constant: u64, unit: &'static str, unit_value: u64) -> Self {
        Self { per_n, constant, unit, unit_value }
    }

    pub fn eval(&self, n: u64) -> u64 {
        (self.per_n * n + self.constant) * self.unit_value
    }
}

impl fmt::Display for EquationCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lin = match (self.per_n, self.constant) {
            (1, 0) => "N".to_string(),
            (a, 0) => format!("{a}N"),
            (1, c) => format!("(N+{c})"),
            (a, c) => format!("({a}N+{c})"),
        };
        write!(f, "{lin}{}", self.unit)
    }
}

/// Unknowns and equations an attacker holding the database and one query
/// faces, for templates and for indexes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditRow {
    pub scenario: Scenario,
    pub n: u64,
    pub template_unknowns: EquationCount,
    pub template_equations: EquationCount,
    pub index_unknowns: EquationCount,
    pub index_equations: EquationCount,
}

impl AuditRow {
    pub fn holds(&self) -> bool {
        self.template_unknowns.eval(self.n) > self.template_equations.eval(self.n)
            && self.index_unknowns.eval(self.n) > self.index_equations.eval(self.n)
    }
}

/// Individual: templates `(N+1)hw` vs `N·hw`, indexes `(Nk+k)(h+w)` vs
/// `(Nk+k−1)(h+w)`. Common: `(N+2)hw` vs `(N+1)hw` and `(Nk+2k+1)(h+w)` vs
/// `(Nk+2k)(h+w)`.
pub fn audit(scenario: Scenario, n: u64, h: u64, w: u64, k: u64) -> AuditRow {
    let (hw, hpw) = (h * w, h + w);
    let t = |a, c| EquationCount::new(a, c, "hw", hw);
    let i = |a, c| EquationCount::new(a, c, "(h+w)", hpw);
    match scenario {
        Scenario::Individual => AuditRow {
            scenario,
            n,
            template_unknowns: t(1, 1),
            template_equations: t(1, 0),
            index_unknowns: i(k, k),
            index_equations: i(k, k - 1),
        },
        Scenario::Common => AuditRow {
            scenario,
            n,
            template_unknowns: t(1, 2),
            template_equations: t(1, 1),
            index_unknowns: i(k, 2 * k + 1),
            index_equations: i(k, 2 * k),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_reference_points() {
        assert_eq!(payload_size(Scenario::Common, 32000, 32, 64, 2, 2), 4672);
        assert_eq!(payload_size(Scenario::Common, 1, 32, 64, 2, 2), 4672);
        assert_eq!(payload_size(Scenario::Individual, 32000, 32, 64, 2, 2), 143_360_192);
        assert_eq!(payload_size(Scenario::Individual, 0, 32, 64, 2, 2), 96 * 2);
    }

    #[test]
    fn audit_rendering() {
        let r = audit(Scenario::Common, 10, 32, 64, 2);
        assert_eq!(r.index_unknowns.to_string(), "(2N+5)(h+w)");
        assert_eq!(r.template_equations.to_string(), "(N+1)hw");
        assert!(r.holds());
    }
}
