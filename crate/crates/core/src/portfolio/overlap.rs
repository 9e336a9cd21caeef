//! Ownership and claim cross-tabulation across products.

use std::collections::BTreeMap;

use serde::Serialize;

use super::Portfolio;

/// One product's row. Index `m` of each vector refers to customers owning
/// exactly `m + 1` products.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub product: String,
    pub holders: Vec<usize>,
    pub claims: Vec<u64>,
    /// Claims on this product by customers who also claimed on another
    /// product they own.
    pub claims_with_other: Vec<u64>,
}

impl OverlapRow {
    pub fn total_holders(&self) -> usize {
        self.holders.iter().sum()
    }

    pub fn total_claims(&self) -> u64 {
        self.claims.iter().sum()
    }

    pub fn holder_shares(&self) -> Vec<f64> {
        shares(&self.holders.iter().map(|&h| h as f64).collect::<Vec<_>>())
    }

    pub fn claim_shares(&self) -> Vec<f64> {
        shares(&self.claims.iter().map(|&c| c as f64).collect::<Vec<_>>())
    }
}

fn shares(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter().map(|v| if total > 0.0 { 100.0 * v / total } else { 0.0 }).collect()
}

/// Holders and claims per product, split by how many products the customer
/// owns over the whole observation window.
pub fn overlap_report(portfolio: &Portfolio) -> Vec<OverlapRow> {
    let c = portfolio.schema().num_products();
    // customer -> per-product claim totals (None = not owned)
    let mut owned: BTreeMap<usize, Vec<Option<u64>>> = BTreeMap::new();
    for r in portfolio.records() {
        let slot = &mut owned.entry(r.customer).or_insert_with(|| vec![None; c])[r.product];
        *slot = Some(slot.unwrap_or(0) + r.claim_count as u64);
    }
    let mut rows: Vec<OverlapRow> = (0..c)
        .map(|j| OverlapRow {
            product: portfolio.schema().product_name(j).to_string(),
            holders: vec![0; c],
            claims: vec![0; c],
            claims_with_other: vec![0; c],
        })
        .collect();
    for products in owned.values() {
        let m = products.iter().filter(|p| p.is_some()).count();
        for (j, claims) in products.iter().enumerate() {
            let Some(n) = *claims else { continue };
            let row = &mut rows[j];
            row.holders[m - 1] += 1;
            row.claims[m - 1] += n;
            let other = products.iter().enumerate().any(|(k, p)| k != j && p.unwrap_or(0) > 0);
            if n > 0 && other {
                row.claims_with_other[m - 1] += n;
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::super::tests::schema_ab;
    use super::*;

    #[test]
    fn single_holder() {
        let text = "customer_id,product,calendar_year,exposure,claim_count,claim_total,region,age\nc1,A,2012,1,0,0,n,1\n";
        let p = Portfolio::read_csv(text.as_bytes(), &schema_ab(), "t").unwrap();
        let rows = overlap_report(&p);
        assert_eq!(rows[0].holders, vec![1, 0]);
        assert_eq!(rows[0].holder_shares(), vec![100.0, 0.0]);
        assert_eq!(rows[1].total_holders(), 0);
    }

    #[test]
    fn cross_claims() {
        let text = "\
customer_id,product,calendar_year,exposure,claim_count,claim_total,region,age
c1,A,2012,1,2,20,n,1
c1,B,2012,1,1,10,n,
c2,A,2012,1,1,5,n,1
c2,B,2012,1,0,0,n,
c3,A,2012,1,3,5,n,1
";
        let p = Portfolio::read_csv(text.as_bytes(), &schema_ab(), "t").unwrap();
        let rows = overlap_report(&p);
        assert_eq!(rows[0].holders, vec![1, 2]);
        assert_eq!(rows[0].claims, vec![3, 3]);
        assert_eq!(rows[0].claims_with_other, vec![0, 2]);
        assert_eq!(rows[1].claims_with_other, vec![0, 1]);
        for row in &rows {
            assert_eq!(row.total_holders(), row.holders.iter().sum::<usize>());
            let s: f64 = row.claim_shares().iter().sum();
            assert!((s - 100.0).abs() < 0.01);
        }
    }
}
