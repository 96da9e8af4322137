//! placeholder
pub struct KktCertificate;
pub struct OracleOptions;
pub struct OracleSolution;
