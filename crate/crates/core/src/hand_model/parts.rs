use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

/// Face category used for per-part visibility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandPart {
    Index,
    Middle,
    Ring,
    Pinky,
    Thumb,
    Dorsum,
    Palm,
}

impl HandPart {
    pub const ALL: [HandPart; 7] = [
        HandPart::Index,
        HandPart::Middle,
        HandPart::Ring,
        HandPart::Pinky,
        HandPart::Thumb,
        HandPart::Dorsum,
        HandPart::Palm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HandPart::Index => "index",
            HandPart::Middle => "middle",
            HandPart::Ring => "ring",
            HandPart::Pinky => "pinky",
            HandPart::Thumb => "thumb",
            HandPart::Dorsum => "dorsum",
            HandPart::Palm => "palm",
        }
    }

    pub fn finger(self) -> Option<Finger> {
        match self {
            HandPart::Index => Some(Finger::Index),
            HandPart::Middle => Some(Finger::Middle),
            HandPart::Ring => Some(Finger::Ring),
            HandPart::Pinky => Some(Finger::Pinky),
            HandPart::Thumb => Some(Finger::Thumb),
            HandPart::Dorsum | HandPart::Palm => None,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for HandPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    /// Keypoint-layout order.
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];

    pub fn part(self) -> HandPart {
        match self {
            Finger::Thumb => HandPart::Thumb,
            Finger::Index => HandPart::Index,
            Finger::Middle => HandPart::Middle,
            Finger::Ring => HandPart::Ring,
            Finger::Pinky => HandPart::Pinky,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.part().as_str()
    }

    /// First keypoint of this finger in the 21-point layout.
    pub fn first_keypoint(self) -> usize {
        1 + 4 * Finger::ALL.iter().position(|&f| f == self).unwrap()
    }

    /// Knuckle keypoint: MCP for fingers, the thumb's MCP (second thumb point).
    pub fn mcp_keypoint(self) -> usize {
        match self {
            Finger::Thumb => self.first_keypoint() + 1,
            _ => self.first_keypoint(),
        }
    }

    pub fn tip_keypoint(self) -> usize {
        self.first_keypoint() + 3
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Finger {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Finger::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown finger {s:?}"))
    }
}

/// One value per [`HandPart`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PartMap<T>(pub [T; 7]);

impl<T> PartMap<T> {
    pub fn from_fn(mut f: impl FnMut(HandPart) -> T) -> Self {
        PartMap(HandPart::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (HandPart, &T)> {
        HandPart::ALL.into_iter().zip(self.0.iter())
    }
}

impl<T> Index<HandPart> for PartMap<T> {
    type Output = T;

    fn index(&self, part: HandPart) -> &T {
        &self.0[part.slot()]
    }
}

impl<T> IndexMut<HandPart> for PartMap<T> {
    fn index_mut(&mut self, part: HandPart) -> &mut T {
        &mut self.0[part.slot()]
    }
}

impl<T: Serialize> Serialize for PartMap<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(7))?;
        for (part, value) in self.iter() {
            map.serialize_entry(part.as_str(), value)?;
        }
        map.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keypoint_layout_indices() {
        assert_eq!(Finger::Thumb.first_keypoint(), 1);
        assert_eq!(Finger::Thumb.mcp_keypoint(), 2);
        assert_eq!(Finger::Index.mcp_keypoint(), 5);
        assert_eq!(Finger::Pinky.tip_keypoint(), 20);
    }

    #[test]
    fn part_map_indexing() {
        let mut m = PartMap::<f64>::default();
        m[HandPart::Palm] = 2.0;
        assert_eq!(m.0[6], 2.0);
        assert_eq!(m.iter().filter(|(_, v)| **v > 0.0).count(), 1);
    }

    #[test]
    fn finger_parsing() {
        assert_eq!("Middle".parse::<Finger>().unwrap(), Finger::Middle);
        assert!("wrist".parse::<Finger>().is_err());
    }
}
