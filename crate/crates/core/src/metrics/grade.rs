use std::fmt;

use serde::{Deserialize, Serialize};

/// Clinical DR severity, ordered from healthy to proliferative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum DRGrade {
    NoDR = 0,
    MildNPDR = 1,
    ModerateNPDR = 2,
    SevereNPDR = 3,
    ProliferativeDR = 4,
}

impl DRGrade {
    pub const ALL: [DRGrade; 5] = [
        DRGrade::NoDR,
        DRGrade::MildNPDR,
        DRGrade::ModerateNPDR,
        DRGrade::SevereNPDR,
        DRGrade::ProliferativeDR,
    ];
    pub const COUNT: usize = 5;

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DRGrade::NoDR => "No DR",
            DRGrade::MildNPDR => "Mild NPDR",
            DRGrade::ModerateNPDR => "Moderate NPDR",
            DRGrade::SevereNPDR => "Severe NPDR",
            DRGrade::ProliferativeDR => "Proliferative DR",
        }
    }
}

impl fmt::Display for DRGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<DRGrade> for u8 {
    fn from(g: DRGrade) -> u8 {
        g as u8
    }
}

impl TryFrom<u8> for DRGrade {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        Self::from_index(v as usize).ok_or_else(|| format!("grade {v} outside 0..=4"))
    }
}

/// Upper microaneurysm count (inclusive) still graded mild.
pub const MILD_MAX_MA: u32 = 5;
/// Upper microaneurysm count (inclusive) still graded moderate.
pub const MODERATE_MAX_MA: u32 = 15;

/// Grade from microaneurysm count; neovascularisation always means proliferative.
///
/// Counts 1–5 are mild, 6–15 moderate and above 15 severe.
pub fn grade_from_lesions(ma_count: u32, neovascularisation: bool) -> DRGrade {
    if neovascularisation {
        return DRGrade::ProliferativeDR;
    }
    match ma_count {
        0 => DRGrade::NoDR,
        1..=MILD_MAX_MA => DRGrade::MildNPDR,
        6..=MODERATE_MAX_MA => DRGrade::ModerateNPDR,
        _ => DRGrade::SevereNPDR,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lesion_rule_examples() {
        assert_eq!(grade_from_lesions(0, false), DRGrade::NoDR);
        assert_eq!(grade_from_lesions(10, false), DRGrade::ModerateNPDR);
        assert_eq!(grade_from_lesions(20, false), DRGrade::SevereNPDR);
        assert_eq!(grade_from_lesions(10, true), DRGrade::ProliferativeDR);
        assert_eq!(grade_from_lesions(0, true), DRGrade::ProliferativeDR);
    }

    #[test]
    fn grades_are_severity_ordered() {
        let mut prev = DRGrade::NoDR;
        for ma in 0..40 {
            let g = grade_from_lesions(ma, false);
            assert!(g >= prev);
            prev = g;
        }
        assert!(DRGrade::ProliferativeDR > DRGrade::SevereNPDR);
        assert_eq!(DRGrade::try_from(7u8).unwrap_err(), "grade 7 outside 0..=4");
    }
}
