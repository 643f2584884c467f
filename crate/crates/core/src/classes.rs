//! The 18-entry semantic class table shared by every stage.

/// Number of semantic (non-free) classes.
pub const NUM_SEMANTIC: usize = 17;
/// Semantic classes plus `free`.
pub const NUM_CLASSES: usize = 18;
/// Label id for unoccupied space.
pub const FREE: u8 = 17;

pub const OTHERS: u8 = 0;
pub const BARRIER: u8 = 1;
pub const BICYCLE: u8 = 2;
pub const BUS: u8 = 3;
pub const CAR: u8 = 4;
pub const CONSTRUCTION_VEHICLE: u8 = 5;
pub const MOTORCYCLE: u8 = 6;
pub const PEDESTRIAN: u8 = 7;
pub const TRAFFIC_CONE: u8 = 8;
pub const TRAILER: u8 = 9;
pub const TRUCK: u8 = 10;
pub const DRIVEABLE_SURFACE: u8 = 11;
pub const OTHER_FLAT: u8 = 12;
pub const SIDEWALK: u8 = 13;
pub const TERRAIN: u8 = 14;
pub const MANMADE: u8 = 15;
pub const VEGETATION: u8 = 16;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "others",
    "barrier",
    "bicycle",
    "bus",
    "car",
    "construction_vehicle",
    "motorcycle",
    "pedestrian",
    "traffic_cone",
    "trailer",
    "truck",
    "driveable_surface",
    "other_flat",
    "sidewalk",
    "terrain",
    "manmade",
    "vegetation",
    "free",
];

/// Movable-agent classes whose points are taken from the key frame only.
pub const DEFAULT_DYNAMIC: [u8; 8] = [BICYCLE, BUS, CAR, CONSTRUCTION_VEHICLE, MOTORCYCLE, PEDESTRIAN, TRAILER, TRUCK];

/// Display colors used for PLY and rendered images.
pub const CLASS_COLORS: [[u8; 3]; NUM_CLASSES] = [
    [0, 0, 0],
    [255, 120, 50],
    [255, 192, 203],
    [255, 255, 0],
    [0, 150, 245],
    [0, 255, 255],
    [200, 180, 0],
    [255, 0, 0],
    [255, 240, 150],
    [135, 60, 0],
    [160, 32, 240],
    [255, 0, 255],
    [139, 137, 137],
    [75, 0, 75],
    [150, 240, 80],
    [230, 230, 250],
    [0, 175, 0],
    [255, 255, 255],
];

pub fn is_semantic(label: u8) -> bool {
    (label as usize) < NUM_SEMANTIC
}

pub fn name(label: u8) -> &'static str {
    CLASS_NAMES.get(label as usize).copied().unwrap_or("invalid")
}

/// Short column headers for the text report.
pub const SHORT_NAMES: [&str; NUM_CLASSES] = [
    "others", "barrier", "bicycle", "bus", "car", "constr.", "motorc.", "ped.", "cone", "trailer", "truck", "driv.",
    "o.flat", "sidewalk", "terrain", "manmade", "veget.", "free",
];
