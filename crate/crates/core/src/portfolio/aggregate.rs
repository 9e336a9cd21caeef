//! Policy-year aggregation.

use std::collections::HashMap;

use super::PolicyRecord;

type SpellKey = (usize, usize, i32);

/// Sum exposures, counts and totals of rows sharing customer, product, year
/// and covariates. Rows whose covariates differ stay apart and are numbered
/// by spell in order of first appearance. Output is sorted by customer,
/// product, year and spell.
pub(crate) fn aggregate(records: &[PolicyRecord]) -> Vec<PolicyRecord> {
    let mut out: Vec<PolicyRecord> = Vec::new();
    let mut index: HashMap<(SpellKey, Vec<(u8, u64)>), usize> = HashMap::new();
    let mut spells: HashMap<SpellKey, u32> = HashMap::new();
    for r in records {
        let key = (r.customer, r.product, r.calendar_year);
        let cov: Vec<(u8, u64)> = r.covariates.iter().map(|c| c.key()).collect();
        match index.get(&(key, cov.clone())) {
            Some(&i) => {
                let agg = &mut out[i];
                agg.exposure += r.exposure;
                agg.claim_count += r.claim_count;
                agg.claim_total += r.claim_total;
            }
            None => {
                let counter = spells.entry(key).or_insert(0);
                let mut fresh = r.clone();
                fresh.spell = *counter;
                *counter += 1;
                index.insert((key, cov), out.len());
                out.push(fresh);
            }
        }
    }
    out.sort_by_key(|r| (r.customer, r.product, r.calendar_year, r.spell));
    out
}
