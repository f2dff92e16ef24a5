//! Reference parameter set and published transform values used by tests,
//! presets and benchmarks.

use alloc::vec;

use nalgebra::dmatrix;

use crate::matfun::RMat;
use crate::model::{Gindikin, LaplaceQuery, WishartModel};

pub fn reference_s0() -> RMat {
    dmatrix![0.0120, 0.0010; 0.0010, 0.0030]
}

pub fn reference_q() -> RMat {
    dmatrix![0.141421356237310, -0.070710678118655; 0.0, 0.070710678118655]
}

pub fn reference_m() -> RMat {
    dmatrix![-0.02, -0.02; -0.01, -0.02]
}

pub const REFERENCE_ALPHA: f64 = 3.0;

pub fn reference_v() -> RMat {
    dmatrix![0.1000, 0.0400; 0.0400, 0.1000]
}

pub fn reference_w() -> RMat {
    dmatrix![0.1100, 0.0300; 0.0300, 0.1100]
}

pub fn reference_model() -> WishartModel {
    WishartModel::new(
        reference_s0(),
        reference_m(),
        reference_q(),
        Gindikin::Scalar(REFERENCE_ALPHA),
    )
    .expect("reference model is valid")
}

pub fn reference_query(t: f64) -> LaplaceQuery {
    LaplaceQuery::new(reference_w(), reference_v(), t).expect("reference query is valid")
}

/// Published values on the short grid: `(t, linearization, closed form,
/// variation of constants, Runge-Kutta)`.
pub const SHORT_HORIZON: [(f64, f64, f64, f64, f64); 31] = [
    (0.0, 0.998291461216988, 0.998291461216988, 0.998291461216988, 0.998291461216988),
    (0.1, 0.997303305375919, 0.997303305375919, 0.997306285702955, 0.997271605593416),
    (0.2, 0.996253721242885, 0.996253721242885, 0.996258979717961, 0.996190498718109),
    (0.3, 0.995143124879428, 0.995143124879428, 0.995142369361912, 0.995048563313279),
    (0.4, 0.993971944944528, 0.993971944944528, 0.993956917727425, 0.993846234580745),
    (0.5, 0.992740622447456, 0.992740622447456, 0.992703104707601, 0.992583959952442),
    (0.6, 0.991449610496379, 0.991449610496380, 0.991381426685627, 0.991262198836806),
    (0.7, 0.990099374042951, 0.990099374042951, 0.989992396217013, 0.989881422361235),
    (0.8, 0.988690389623073, 0.988690389623073, 0.988536541704748, 0.988442113110838),
    (0.9, 0.987223145094070, 0.987223145094070, 0.987014407067708, 0.986944764863693),
    (1.0, 0.985698139368470, 0.985698139368470, 0.985426551402640, 0.985389882322825),
    (1.1, 0.984115882144609, 0.984115882144608, 0.983773548640023, 0.983777980845113),
    (1.2, 0.982476893634278, 0.982476893634278, 0.982055987194167, 0.982109586167352),
    (1.3, 0.980781704287638, 0.980781704287638, 0.980274469607849, 0.980385234129674),
    (1.4, 0.979030854515581, 0.979030854515582, 0.978429612191836, 0.978605470396549),
    (1.5, 0.977224894409802, 0.977224894409802, 0.976522044659620, 0.976770850175581),
    (1.6, 0.975364383460752, 0.975364383460752, 0.974552409757698, 0.974881937934301),
    (1.7, 0.973449890273708, 0.973449890273707, 0.972521362891742, 0.972939307115188),
    (1.8, 0.971481992283166, 0.971481992283166, 0.970429571748981, 0.970943539849112),
    (1.9, 0.969461275465768, 0.969461275465768, 0.968277715917132, 0.968895226667421),
    (2.0, 0.967388334051965, 0.967388334051964, 0.966066486500228, 0.966794966212865),
    (2.1, 0.965263770236630, 0.965263770236631, 0.963796585731653, 0.964643364949586),
    (2.2, 0.963088193888842, 0.963088193888842, 0.961468726584740, 0.962441036872358),
    (2.3, 0.960862222260992, 0.960862222260992, 0.959083632381238, 0.960188603215284),
    (2.4, 0.958586479697485, 0.958586479697484, 0.956642036397998, 0.957886692160160),
    (2.5, 0.956261597343174, 0.956261597343174, 0.954144681472186, 0.955535938544691),
    (2.6, 0.953888212851758, 0.953888212851759, 0.951592319605355, 0.953136983570760),
    (2.7, 0.951466970094322, 0.951466970094322, 0.948985711566685, 0.950690474512938),
    (2.8, 0.948998518868209, 0.948998518868209, 0.946325626495722, 0.948197064427429),
    (2.9, 0.946483514606424, 0.946483514606425, 0.943612841504911, 0.945657411861629),
    (3.0, 0.943922618087738, 0.943922618087738, 0.940848141282233, 0.943072180564490),
];

/// Published values on the long grid: `(t, linearization, closed form,
/// Runge-Kutta)`. The last row is printed as `0.000001636282753` while the
/// transform at `t = 100` is `1.636282753...e-4`.
pub const LONG_HORIZON: [(f64, f64, f64, f64); 13] = [
    (0.0, 0.998291461216988, 0.998291461216988, 0.998291461216988),
    (0.1, 0.997303305375919, 0.997303305375919, 0.997271605593416),
    (0.2, 0.996253721242885, 0.996253721242885, 0.996190498718109),
    (0.3, 0.995143124879428, 0.995143124879428, 0.995048563313279),
    (0.4, 0.993971944944528, 0.993971944944528, 0.993846234580745),
    (0.5, 0.992740622447456, 0.992740622447456, 0.992583959952442),
    (1.0, 0.985698139368470, 0.985698139368470, 0.985389882322825),
    (2.0, 0.967388334051965, 0.967388334051964, 0.966794966212865),
    (3.0, 0.943922618087738, 0.943922618087738, 0.943072180564490),
    (4.0, 0.915938197508059, 0.915938197508059, 0.914862207389661),
    (5.0, 0.884120166104796, 0.884120166104796, 0.882852196560219),
    (10.0, 0.691634000576684, 0.691634000576684, 0.689897813632122),
    (100.0, 0.000001636282753, 0.000001636282753, 0.000001629036716),
];
