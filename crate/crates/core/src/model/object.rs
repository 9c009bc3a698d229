use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::BBox;
use super::ModelError;

macro_rules! attribute_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(ModelError::UnknownAttribute(s.to_string())),
                }
            }
        }
    };
}

attribute_enum!(Shape { Cube => "cube", Sphere => "sphere", Cylinder => "cylinder" });
attribute_enum!(Material { Rubber => "rubber", Metal => "metal" });
attribute_enum!(
    /// The eight CLEVR colors, in CLEVR's own ordering.
    Color {
        Gray => "gray",
        Red => "red",
        Blue => "blue",
        Green => "green",
        Brown => "brown",
        Purple => "purple",
        Cyan => "cyan",
        Yellow => "yellow",
    }
);

pub const NUM_CLASSES: usize = 48;

/// Visual identity of an object: everything except where it sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Attributes {
    pub shape: Shape,
    pub material: Material,
    pub color: Color,
}

impl Attributes {
    pub fn new(color: Color, material: Material, shape: Shape) -> Self {
        Self { shape, material, color }
    }

    /// `color * 6 + material * 3 + shape`, in `0..48`.
    pub fn class_id(&self) -> u32 {
        (self.color.index() * 6 + self.material.index() * 3 + self.shape.index()) as u32
    }

    pub fn from_class_id(id: u32) -> Option<Self> {
        let id = id as usize;
        if id >= NUM_CLASSES {
            return None;
        }
        Some(Self {
            color: Color::from_index(id / 6)?,
            material: Material::from_index((id / 3) % 2)?,
            shape: Shape::from_index(id % 3)?,
        })
    }

    pub fn all() -> impl Iterator<Item = Attributes> {
        (0..NUM_CLASSES as u32).filter_map(Self::from_class_id)
    }

    /// `"<color> <material> <shape>"`.
    pub fn caption(&self) -> String {
        format!("{} {} {}", self.color, self.material, self.shape)
    }

    pub fn parse_caption(caption: &str) -> Result<Self, ModelError> {
        let parts: Vec<&str> = caption.split(' ').collect();
        let [color, material, shape] = parts.as_slice() else {
            return Err(ModelError::UnknownAttribute(caption.to_string()));
        };
        Ok(Self { color: color.parse()?, material: material.parse()?, shape: shape.parse()? })
    }
}

/// One CLEVR-style object with its placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub material: Material,
    pub color: Color,
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// Simulator-unit scale the box was derived from, when sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl ObjectSpec {
    pub fn new(attrs: Attributes, bbox: BBox) -> Self {
        Self { shape: attrs.shape, material: attrs.material, color: attrs.color, bbox, scale: None }
    }

    pub fn attributes(&self) -> Attributes {
        Attributes { shape: self.shape, material: self.material, color: self.color }
    }

    pub fn class_id(&self) -> u32 {
        self.attributes().class_id()
    }

    pub fn caption(&self) -> String {
        self.attributes().caption()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn class_ids_are_a_bijection() {
        let ids: HashSet<u32> = Attributes::all().map(|a| a.class_id()).collect();
        assert_eq!(ids.len(), 48);
        assert_eq!(*ids.iter().max().unwrap(), 47);
        for a in Attributes::all() {
            assert_eq!(Attributes::from_class_id(a.class_id()), Some(a));
            assert_eq!(Attributes::parse_caption(&a.caption()).unwrap(), a);
        }
        assert_eq!(Attributes::from_class_id(48), None);
    }

    #[test]
    fn class_formula() {
        let a = Attributes::new(Color::Cyan, Material::Metal, Shape::Sphere);
        assert_eq!(a.class_id(), 6 * 6 + 3 + 1);
        assert_eq!(a.caption(), "cyan metal sphere");
        let g = Attributes::new(Color::Green, Material::Metal, Shape::Cylinder);
        assert_eq!(g.class_id(), 23);
    }

    #[test]
    fn bad_captions() {
        assert!(Attributes::parse_caption("cyan metal").is_err());
        assert!(Attributes::parse_caption("pink metal sphere").is_err());
        assert!(Attributes::parse_caption("cyan  metal sphere").is_err());
    }

    #[test]
    fn object_json() {
        let o = ObjectSpec::new(
            Attributes::new(Color::Cyan, Material::Metal, Shape::Sphere),
            BBox::new(1, 2, 30, 40).unwrap(),
        );
        let s = serde_json::to_string(&o).unwrap();
        assert_eq!(s, r#"{"shape":"sphere","material":"metal","color":"cyan","box":[1,2,30,40]}"#);
        assert_eq!(serde_json::from_str::<ObjectSpec>(&s).unwrap(), o);
    }
}
