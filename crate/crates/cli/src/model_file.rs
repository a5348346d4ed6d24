//! On-disk model document: the fitted parameters tagged by family.

use riskcal::{NbParameters, QdaParameters};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", content = "parameters", rename_all = "lowercase")]
pub enum ModelFile {
    Nb(NbParameters),
    Qda(QdaParameters),
}
