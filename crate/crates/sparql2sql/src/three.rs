//! The three truth values used by filter evaluation: true, false, and
//! error. Connectives follow Kleene tables with error as the third value.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tv3 {
    True,
    False,
    Err,
}

impl Tv3 {
    pub fn from_bool(b: bool) -> Tv3 {
        if b {
            Tv3::True
        } else {
            Tv3::False
        }
    }

    pub fn not(self) -> Tv3 {
        match self {
            Tv3::True => Tv3::False,
            Tv3::False => Tv3::True,
            Tv3::Err => Tv3::Err,
        }
    }

    /// False dominates error: err ∧ false = false.
    pub fn and(self, other: Tv3) -> Tv3 {
        match (self, other) {
            (Tv3::False, _) | (_, Tv3::False) => Tv3::False,
            (Tv3::Err, _) | (_, Tv3::Err) => Tv3::Err,
            _ => Tv3::True,
        }
    }

    pub fn or(self, other: Tv3) -> Tv3 {
        self.not().and(other.not()).not()
    }

    pub fn is_true(self) -> bool {
        self == Tv3::True
    }
}

#[cfg(test)]
mod tests {
    use super::Tv3::*;

    #[test]
    fn kleene_tables() {
        assert_eq!(Err.not(), Err);
        assert_eq!(Err.and(False), False);
        assert_eq!(Err.and(True), Err);
        assert_eq!(Err.or(True), True);
        assert_eq!(Err.or(False), Err);
        assert_eq!(Err.or(Err), Err);
    }
}
