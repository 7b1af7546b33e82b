use multiway::btd::Ll1Term;
use multiway::cpd::CPModel;
use multiway::io::{self, BtdDoc, CpDoc, TtDoc, TuckerDoc};
use multiway::kron_cs::SparseCore;
use multiway::{DenseTensor, Matrix};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn validate(schema: &str, doc: &Value) {
    let schema: Value = serde_json::from_str(schema).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{doc}");
}

fn tensor() -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    DenseTensor::new(vec![3, 4, 5], Matrix::random_normal(60, 1, &mut rng).into_data()).unwrap()
}

#[test]
fn documents_match_shipped_schemas() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cp = CPModel::from_factors((0..3).map(|_| Matrix::random_normal(4, 2, &mut rng)).collect()).unwrap();
    validate(io::CP_SCHEMA, &serde_json::to_value(CpDoc::from_model(&cp)).unwrap());

    let tk = multiway::tucker::truncated_mlsvd(&tensor(), &[2, 2, 2]).unwrap();
    validate(io::TUCKER_SCHEMA, &serde_json::to_value(TuckerDoc::from_model(&tk)).unwrap());

    let term = Ll1Term::new(Matrix::random_normal(3, 2, &mut rng), Matrix::random_normal(4, 2, &mut rng), vec![1.0; 5]).unwrap();
    validate(io::BTD_SCHEMA, &serde_json::to_value(BtdDoc::from_terms(&[term]).unwrap()).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let header = dir.path().join("m.json");
    io::write_tt(&header, &multiway::tt::tt_svd(&tensor(), 1e-6).unwrap()).unwrap();
    let tt: Value = serde_json::from_slice(&std::fs::read(&header).unwrap()).unwrap();
    validate(io::TT_SCHEMA, &tt);
    let _: TtDoc = serde_json::from_value(tt).unwrap();

    let mut sc = SparseCore::new(vec![2, 2]).unwrap();
    sc.insert(vec![0, 1], 3.0).unwrap();
    validate(io::SPARSE_CORE_SCHEMA, &serde_json::to_value(&sc).unwrap());

    let d = multiway::kron_cs::dct_dictionary(&[4, 4, 2], 0.5, 1).unwrap();
    validate(io::KRON_DICTIONARY_SCHEMA, &serde_json::to_value(io::KronDictionaryDoc::from_dictionary(&d)).unwrap());
}

#[test]
fn schemas_reject_foreign_documents() {
    let schema: Value = serde_json::from_str(io::TUCKER_SCHEMA).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    assert!(!v.is_valid(&serde_json::json!({"kind": "cp", "version": 1})));
}
