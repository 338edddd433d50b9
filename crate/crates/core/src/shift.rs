//! Spatial-shift configurations.
//!
//! A [`ShiftConfig`] is an ordered list of displacements. Channels are split
//! into `g = displacements.len()` contiguous equal groups and group `τ` is
//! moved by displacement `τ`. A displacement `(dx, dy)` moves content toward
//! increasing width (`dx > 0`) or height (`dy > 0`): output position `x`
//! receives input position `x - dx`.
//!
//! The preset labels follow the ablation grid of shifting settings:
//!
//! | label | displacements                              | g |
//! |-------|--------------------------------------------|---|
//! | a     | (+1,0) (−1,0) (0,+1) (0,−1)                | 4 |
//! | b     | a + (+1,+1) (+1,−1) (−1,+1) (−1,−1)        | 8 |
//! | c     | (+1,0) (0,+1)                              | 2 |
//! | d     | (−1,0) (0,−1)                              | 2 |
//! | e     | (0,+1) (0,−1) — vertical pair              | 2 |
//! | f     | (+1,0) (−1,0) — horizontal pair            | 2 |
//! | g     | (+1,0)                                     | 1 |
//! | h     | (−1,0)                                     | 1 |
//! | i     | (0,+1)                                     | 1 |
//! | j     | (0,−1)                                     | 1 |
//! | none  | (identity)                                 | 0 |

use std::fmt;

use crate::error::{Error, Result};

pub const PRESET_LABELS: [&str; 11] = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "none"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Displacement {
    pub dx: i32,
    pub dy: i32,
}

impl Displacement {
    pub const fn new(dx: i32, dy: i32) -> Self {
        Displacement { dx, dy }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftConfig {
    pub name: String,
    pub displacements: Vec<Displacement>,
}

const fn d(dx: i32, dy: i32) -> Displacement {
    Displacement::new(dx, dy)
}

impl ShiftConfig {
    pub fn preset(label: &str) -> Result<Self> {
        let displacements = match label {
            "a" => vec![d(1, 0), d(-1, 0), d(0, 1), d(0, -1)],
            "b" => vec![
                d(1, 0),
                d(-1, 0),
                d(0, 1),
                d(0, -1),
                d(1, 1),
                d(1, -1),
                d(-1, 1),
                d(-1, -1),
            ],
            "c" => vec![d(1, 0), d(0, 1)],
            "d" => vec![d(-1, 0), d(0, -1)],
            "e" => vec![d(0, 1), d(0, -1)],
            "f" => vec![d(1, 0), d(-1, 0)],
            "g" => vec![d(1, 0)],
            "h" => vec![d(-1, 0)],
            "i" => vec![d(0, 1)],
            "j" => vec![d(0, -1)],
            "none" => vec![],
            other => {
                return Err(Error::config(format!(
                    "unknown shift preset {other:?}; valid labels are {}",
                    PRESET_LABELS.join(", ")
                )))
            }
        };
        Ok(ShiftConfig {
            name: label.to_string(),
            displacements,
        })
    }

    /// Parses `dx,dy;dx,dy;...`. Whitespace is ignored; the empty string is
    /// the identity configuration.
    pub fn parse_custom(text: &str) -> Result<Self> {
        let mut displacements = Vec::new();
        if text.trim().is_empty() {
            return Ok(ShiftConfig::custom(displacements));
        }
        let mut pos = 0;
        for pair in text.split(';') {
            let pair_start = pos;
            pos += pair.len() + 1;
            let mut parts = pair.split(',');
            let (Some(xs), Some(ys), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    token: pair.to_string(),
                    position: pair_start,
                    message: "expected a pair \"dx,dy\"".into(),
                });
            };
            let int = |tok: &str, at: usize| {
                tok.trim().parse::<i32>().map_err(|_| Error::Parse {
                    token: tok.to_string(),
                    position: at,
                    message: "not an integer".into(),
                })
            };
            let dx = int(xs, pair_start)?;
            let dy = int(ys, pair_start + xs.len() + 1)?;
            displacements.push(Displacement { dx, dy });
        }
        Ok(ShiftConfig::custom(displacements))
    }

    pub fn custom(displacements: Vec<Displacement>) -> Self {
        ShiftConfig {
            name: "custom".into(),
            displacements,
        }
    }

    /// Resolves a preset label, falling back to the custom grammar.
    pub fn from_spec(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        if PRESET_LABELS.contains(&trimmed) {
            Self::preset(trimmed)
        } else {
            Self::parse_custom(trimmed)
        }
    }

    /// Canonical custom-grammar rendering of the displacement list.
    pub fn render(&self) -> String {
        self.displacements
            .iter()
            .map(|d| format!("{},{}", d.dx, d.dy))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Preset label if this is a preset, otherwise the custom rendering.
    pub fn spec_string(&self) -> String {
        if self.name != "custom" && PRESET_LABELS.contains(&self.name.as_str()) {
            self.name.clone()
        } else {
            self.render()
        }
    }

    pub fn groups(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_identity(&self) -> bool {
        self.displacements.is_empty()
    }

    /// Checks only the channel split (`c mod g == 0`).
    pub fn validate_channels(&self, channels: usize) -> Result<()> {
        let g = self.groups();
        if g > 0 && !channels.is_multiple_of(g) {
            return Err(Error::config(format!(
                "{channels} channels cannot be split into {g} equal shift groups \
                 ({channels} mod {g} = {})",
                channels % g
            )));
        }
        Ok(())
    }

    /// Full validity check for a `w × h × c` feature map.
    ///
    /// Unit moves are accepted on any grid (on an extent-1 axis every source
    /// falls outside and the group keeps its values); larger moves must be
    /// strictly smaller than the axis extent.
    pub fn validate(&self, w: usize, h: usize, channels: usize) -> Result<()> {
        self.validate_channels(channels)?;
        let fits = |m: u32, extent: usize| m <= 1 || (m as usize) < extent;
        for d in &self.displacements {
            if !fits(d.dx.unsigned_abs(), w) || !fits(d.dy.unsigned_abs(), h) {
                return Err(Error::config(format!(
                    "displacement ({},{}) does not fit a {w}×{h} grid",
                    d.dx, d.dy
                )));
            }
        }
        Ok(())
    }

    /// Half-open channel range and displacement of each group.
    pub fn group_ranges(&self, channels: usize) -> Vec<(std::ops::Range<usize>, Displacement)> {
        let g = self.groups();
        if g == 0 {
            return Vec::new();
        }
        let width = channels / g;
        self.displacements
            .iter()
            .enumerate()
            .map(|(t, &d)| (t * width..(t + 1) * width, d))
            .collect()
    }
}

impl fmt::Display for ShiftConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.name, self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_preset_is_four_directions() {
        let a = ShiftConfig::preset("a").unwrap();
        assert_eq!(a.displacements, vec![d(1, 0), d(-1, 0), d(0, 1), d(0, -1)]);
        assert_eq!(a.groups(), 4);
    }

    #[test]
    fn preset_group_counts() {
        let counts: Vec<usize> = PRESET_LABELS
            .iter()
            .map(|l| ShiftConfig::preset(l).unwrap().groups())
            .collect();
        assert_eq!(counts, vec![4, 8, 2, 2, 2, 2, 1, 1, 1, 1, 0]);
        assert!(ShiftConfig::preset("none").unwrap().is_identity());
    }

    #[test]
    fn builtin_presets_use_unit_moves() {
        for label in PRESET_LABELS {
            for d in ShiftConfig::preset(label).unwrap().displacements {
                let l1 = d.dx.abs() + d.dy.abs();
                assert!(l1 == 1 || l1 == 2, "{label}: {d:?}");
            }
        }
    }

    #[test]
    fn unknown_label_lists_valid_ones() {
        let msg = ShiftConfig::preset("z").unwrap_err().to_string();
        assert!(msg.contains("a, b, c"), "{msg}");
    }

    #[test]
    fn parse_examples() {
        let parsed = ShiftConfig::parse_custom("1,0;-1,0;0,1;0,-1").unwrap();
        assert_eq!(
            parsed.displacements,
            ShiftConfig::preset("a").unwrap().displacements
        );
        assert_eq!(parsed.name, "custom");
        assert!(ShiftConfig::parse_custom("").unwrap().is_identity());
        assert_eq!(
            ShiftConfig::parse_custom("2,0").unwrap().displacements,
            vec![d(2, 0)]
        );
        assert_eq!(
            ShiftConfig::parse_custom(" 1 , 0 ; 0 ,-1 ")
                .unwrap()
                .displacements,
            vec![d(1, 0), d(0, -1)]
        );
    }

    #[test]
    fn parse_errors_carry_token_and_position() {
        match ShiftConfig::parse_custom("1,0;x,1") {
            Err(Error::Parse {
                token, position, ..
            }) => {
                assert_eq!(token, "x");
                assert_eq!(position, 4);
            }
            other => panic!("{other:?}"),
        }
        match ShiftConfig::parse_custom("1,0;1,2,3") {
            Err(Error::Parse {
                token, position, ..
            }) => {
                assert_eq!(token, "1,2,3");
                assert_eq!(position, 4);
            }
            other => panic!("{other:?}"),
        }
        assert!(ShiftConfig::parse_custom("1,0;").is_err());
        assert!(ShiftConfig::parse_custom("1;0").is_err());
    }

    #[test]
    fn validation() {
        let a = ShiftConfig::preset("a").unwrap();
        assert!(a.validate(2, 2, 8).is_ok());
        assert!(a.validate(2, 2, 6).is_err());
        assert!(a.validate(1, 1, 4).is_ok());
        let wide = ShiftConfig::parse_custom("2,0").unwrap();
        assert!(wide.validate(2, 4, 1).is_err());
        assert!(wide.validate(3, 1, 1).is_ok());
        let none = ShiftConfig::preset("none").unwrap();
        assert!(none.validate(1, 1, 3).is_ok());
        let ranges = a.group_ranges(8);
        assert_eq!(ranges[2].0, 4..6);
        assert_eq!(ranges[2].1, d(0, 1));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(pairs in proptest::collection::vec((-5i32..=5, -5i32..=5), 0..10)) {
            let cfg = ShiftConfig::custom(pairs.iter().map(|&(x, y)| d(x, y)).collect());
            prop_assert_eq!(ShiftConfig::parse_custom(&cfg.render()).unwrap(), cfg);
        }
    }
}
