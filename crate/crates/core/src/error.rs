use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid map geometry: {0}")]
    MapGeometry(String),
    #[error("point ({x:.3}, {y:.3}, {z:.3}) lies outside the map bounds")]
    OutOfBounds { x: f64, y: f64, z: f64 },
    #[error("invalid sensor configuration: {0}")]
    SensorConfig(String),
    #[error("sensor pose is inside an occupied voxel")]
    PoseOccupied,
    #[error("invalid environment: {0}")]
    Environment(String),
    #[error("invalid motion command: {0}")]
    MotionCommand(String),
    #[error("invalid motion model: {0}")]
    MotionModel(String),
    #[error("robot state is in collision with the map")]
    RootInCollision,
    #[error("no feasible path: {0}")]
    NoPath(String),
    #[error("no frontier is reachable on the global graph")]
    NoReachableFrontier,
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed map dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn out_of_bounds(p: &crate::Vec3) -> Self {
        Error::OutOfBounds {
            x: p.x,
            y: p.y,
            z: p.z,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
