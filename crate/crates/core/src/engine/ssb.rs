//! Toy generator with the shape of the Star Schema Benchmark, and its
//! thirteen flight queries.

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::data::{AttributeDef, Dataset, ForeignKey, RelationDef, Role, SchemaDef};
use crate::error::{Error, Result};
use crate::value::{Decimal, Kind, Value};
use crate::workload::{parse_workload, QueryShape};

pub const FACT_ROWS_PER_SF: f64 = 6_000_000.0;
pub const MAX_SF: f64 = 0.01;
/// Smallest generated dimension, so that tiny scale fractions still give
/// every region and category a chance to appear.
pub const DIMENSION_FLOOR: usize = 25;

const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];
const NATIONS: [(&str, usize); 25] = [
    ("ALGERIA", 0),
    ("ETHIOPIA", 0),
    ("KENYA", 0),
    ("MOROCCO", 0),
    ("MOZAMBIQUE", 0),
    ("ARGENTINA", 1),
    ("BRAZIL", 1),
    ("CANADA", 1),
    ("PERU", 1),
    ("UNITED STATES", 1),
    ("CHINA", 2),
    ("INDIA", 2),
    ("INDONESIA", 2),
    ("JAPAN", 2),
    ("VIETNAM", 2),
    ("FRANCE", 3),
    ("GERMANY", 3),
    ("ROMANIA", 3),
    ("RUSSIA", 3),
    ("UNITED KINGDOM", 3),
    ("EGYPT", 4),
    ("IRAN", 4),
    ("IRAQ", 4),
    ("JORDAN", 4),
    ("SAUDI ARABIA", 4),
];
const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const DAYS: [&str; 7] = [
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
];
const SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"];
const COLORS: [&str; 8] = ["almond", "blue", "coral", "forest", "ivory", "khaki", "navy", "plum"];
const SHIPMODES: [&str; 7] = ["AIR", "FOB", "MAIL", "RAIL", "REG AIR", "SHIP", "TRUCK"];

fn attr(name: &str, kind: Kind) -> AttributeDef {
    AttributeDef::new(name, kind)
}

fn relation(name: &str, role: Role, pk: &[&str], attrs: &[(&str, Kind)]) -> RelationDef {
    RelationDef {
        name: name.into(),
        role,
        primary_key: pk.iter().map(|s| s.to_string()).collect(),
        attributes: attrs.iter().map(|(n, k)| attr(n, *k)).collect(),
    }
}

/// The lineorder star: one fact and the customer, supplier, part and date
/// dimensions.
pub fn ssb_schema_def() -> SchemaDef {
    use Kind::*;
    let relations = vec![
        relation(
            "customer",
            Role::Dimension,
            &["c_custkey"],
            &[
                ("c_custkey", Integer),
                ("c_name", Text),
                ("c_city", Text),
                ("c_nation", Text),
                ("c_region", Text),
                ("c_mktsegment", Text),
            ],
        ),
        relation(
            "supplier",
            Role::Dimension,
            &["s_suppkey"],
            &[
                ("s_suppkey", Integer),
                ("s_name", Text),
                ("s_city", Text),
                ("s_nation", Text),
                ("s_region", Text),
            ],
        ),
        relation(
            "part",
            Role::Dimension,
            &["p_partkey"],
            &[
                ("p_partkey", Integer),
                ("p_name", Text),
                ("p_mfgr", Text),
                ("p_category", Text),
                ("p_brand1", Text),
                ("p_color", Text),
                ("p_size", Integer),
            ],
        ),
        relation(
            "dwdate",
            Role::Dimension,
            &["d_datekey"],
            &[
                ("d_datekey", Integer),
                ("d_date", Date),
                ("d_dayofweek", Text),
                ("d_year", Integer),
                ("d_yearmonthnum", Integer),
                ("d_yearmonth", Text),
                ("d_weeknuminyear", Integer),
            ],
        ),
        relation(
            "lineorder",
            Role::Fact,
            &["lo_orderkey", "lo_linenumber"],
            &[
                ("lo_orderkey", Integer),
                ("lo_linenumber", Integer),
                ("lo_custkey", Integer),
                ("lo_partkey", Integer),
                ("lo_suppkey", Integer),
                ("lo_orderdate", Integer),
                ("lo_quantity", Integer),
                ("lo_extendedprice", Decimal),
                ("lo_discount", Integer),
                ("lo_revenue", Decimal),
                ("lo_supplycost", Decimal),
                ("lo_shipmode", Text),
            ],
        ),
    ];
    let fk = |a: &str, d: &str, k: &str| ForeignKey {
        fact_attribute: a.into(),
        dimension: d.into(),
        dimension_key: k.into(),
    };
    SchemaDef {
        relations,
        foreign_keys: vec![
            fk("lo_custkey", "customer", "c_custkey"),
            fk("lo_suppkey", "supplier", "s_suppkey"),
            fk("lo_partkey", "part", "p_partkey"),
            fk("lo_orderdate", "dwdate", "d_datekey"),
        ],
    }
}

/// Row counts for a scale fraction: fact, customer, supplier, part, date.
pub fn ssb_sizes(sf: f64) -> Result<[usize; 5]> {
    if !(sf > 0.0 && sf <= MAX_SF) {
        return Err(Error::OutOfRange(format!("scale fraction {sf} outside (0, {MAX_SF}]")));
    }
    let scaled = |base: f64| ((base * sf).round() as usize).max(DIMENSION_FLOOR);
    let days = (first_day().with_year(1999).expect("valid") - first_day()).num_days() as usize;
    Ok([
        (FACT_ROWS_PER_SF * sf).round() as usize,
        scaled(30_000.0),
        scaled(2_000.0),
        scaled(200_000.0),
        days,
    ])
}

fn first_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(1992, 1, 1).expect("valid date")
}

fn city(nation: &str, i: u64) -> String {
    let prefix: String = nation.chars().take(9).collect();
    format!("{prefix:<9}{i}")
}

fn text(s: impl Into<String>) -> Value {
    Value::Text(s.into())
}

fn int(i: i64) -> Value {
    Value::Integer(i)
}

fn zipf(n: usize, s: f64) -> Zipf<f64> {
    Zipf::new(n as u64, s).expect("valid zipf parameters")
}

/// Generates the toy star for scale fraction `sf` (at most 0.01). The fact
/// has `round(6M * sf)` rows; dimensions follow the benchmark's ratios with
/// a floor of 25 rows; the date dimension covers 1992 through 1998. Customer
/// nations, part manufacturers, order discounts and customer references are
/// Zipf-skewed. Output is a pure function of `(sf, seed)`.
pub fn generate_star_toy(sf: f64, seed: u64) -> Result<Dataset> {
    let [n_fact, n_cust, n_supp, n_part, n_days] = ssb_sizes(sf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new(ssb_schema_def());
    let push = |ds: &mut Dataset, rel: &str, row: Vec<Value>| -> Result<()> {
        ds.relations.get_mut(rel).expect("declared relation").push_row(row)
    };

    // nations ranked in a seed-dependent order before Zipf draws
    let mut nation_rank: Vec<usize> = (0..NATIONS.len()).collect();
    nation_rank.shuffle(&mut rng);
    let nation_skew = zipf(NATIONS.len(), 1.0);
    for k in 1..=n_cust {
        let n = nation_rank[nation_skew.sample(&mut rng) as usize - 1];
        let (nation, region) = NATIONS[n];
        push(
            &mut ds,
            "customer",
            vec![
                int(k as i64),
                text(format!("Customer#{k:09}")),
                text(city(nation, rng.gen_range(0..10))),
                text(nation),
                text(REGIONS[region]),
                text(*SEGMENTS.choose(&mut rng).expect("nonempty")),
            ],
        )?;
    }
    for k in 1..=n_supp {
        let (nation, region) = NATIONS[rng.gen_range(0..NATIONS.len())];
        push(
            &mut ds,
            "supplier",
            vec![
                int(k as i64),
                text(format!("Supplier#{k:09}")),
                text(city(nation, rng.gen_range(0..10))),
                text(nation),
                text(REGIONS[region]),
            ],
        )?;
    }
    let mfgr_skew = zipf(5, 1.2);
    let mut part_price = Vec::with_capacity(n_part);
    for k in 1..=n_part {
        let m = mfgr_skew.sample(&mut rng) as u32;
        let c = rng.gen_range(1..=5);
        let b = rng.gen_range(1..=40);
        // cents, in the benchmark's 900.00 to 2099.00 band
        part_price.push(90_000 + ((k as i64 / 10) % 20_001) + 100 * (k as i64 % 1_000));
        push(
            &mut ds,
            "part",
            vec![
                int(k as i64),
                text(format!("{} {}", COLORS.choose(&mut rng).expect("nonempty"), k)),
                text(format!("MFGR#{m}")),
                text(format!("MFGR#{m}{c}")),
                text(format!("MFGR#{m}{c}{b:02}")),
                text(*COLORS.choose(&mut rng).expect("nonempty")),
                int(rng.gen_range(1..=50)),
            ],
        )?;
    }
    let mut datekeys = Vec::with_capacity(n_days);
    for d in 0..n_days {
        let day = first_day() + Duration::days(d as i64);
        let key = (day.year() * 10_000 + day.month() as i32 * 100 + day.day() as i32) as i64;
        datekeys.push(key);
        push(
            &mut ds,
            "dwdate",
            vec![
                int(key),
                Value::Date(day),
                text(DAYS[day.weekday().num_days_from_monday() as usize]),
                int(day.year() as i64),
                int((day.year() * 100 + day.month() as i32) as i64),
                text(format!("{}{}", MONTHS[day.month0() as usize], day.year())),
                int(1 + day.ordinal0() as i64 / 7),
            ],
        )?;
    }

    let mut cust_rank: Vec<usize> = (1..=n_cust).collect();
    cust_rank.shuffle(&mut rng);
    let cust_skew = zipf(n_cust, 0.8);
    let discount_skew = zipf(11, 1.0);
    let mut order = 0i64;
    let mut produced = 0;
    while produced < n_fact {
        order += 1;
        let lines = rng.gen_range(1..=7).min(n_fact - produced);
        let cust = cust_rank[cust_skew.sample(&mut rng) as usize - 1] as i64;
        let date = datekeys[rng.gen_range(0..n_days)];
        for line in 1..=lines {
            let part = rng.gen_range(1..=n_part);
            let quantity = rng.gen_range(1..=50i64);
            let discount = discount_skew.sample(&mut rng) as i64 - 1;
            let price = part_price[part - 1];
            // scaled by 10^4 for the decimal type; prices are in cents
            let extended = quantity * price * 100;
            let revenue = extended * (100 - discount) / 100;
            let supply = price * 6 / 10 * 100;
            push(
                &mut ds,
                "lineorder",
                vec![
                    int(order),
                    int(line as i64),
                    int(cust),
                    int(part as i64),
                    int(rng.gen_range(1..=n_supp) as i64),
                    int(date),
                    int(quantity),
                    Value::Decimal(Decimal::from_scaled(extended)),
                    int(discount),
                    Value::Decimal(Decimal::from_scaled(revenue)),
                    Value::Decimal(Decimal::from_scaled(supply)),
                    text(*SHIPMODES.choose(&mut rng).expect("nonempty")),
                ],
            )?;
        }
        produced += lines;
    }
    Ok(ds)
}

/// The thirteen benchmark queries in four flights, over the toy schema. The
/// fact comes first in every FROM list so that the syntactic join order is a
/// chain of foreign-key joins.
pub const SSB_WORKLOAD_SQL: &str = "\
-- id: Q1.1
SELECT sum(lo_extendedprice * lo_discount) AS revenue
FROM lineorder, dwdate
WHERE lo_orderdate = d_datekey
  AND d_year = 1993
  AND lo_discount BETWEEN 1 AND 3
  AND lo_quantity < 25;

-- id: Q1.2
SELECT sum(lo_extendedprice * lo_discount) AS revenue
FROM lineorder, dwdate
WHERE lo_orderdate = d_datekey
  AND d_yearmonthnum = 199401
  AND lo_discount BETWEEN 4 AND 6
  AND lo_quantity BETWEEN 26 AND 35;

-- id: Q1.3
SELECT sum(lo_extendedprice * lo_discount) AS revenue
FROM lineorder, dwdate
WHERE lo_orderdate = d_datekey
  AND d_weeknuminyear = 6
  AND d_year = 1994
  AND lo_discount BETWEEN 5 AND 7
  AND lo_quantity BETWEEN 26 AND 35;

-- id: Q2.1
SELECT sum(lo_revenue), d_year, p_brand1
FROM lineorder, dwdate, part, supplier
WHERE lo_orderdate = d_datekey
  AND lo_partkey = p_partkey
  AND lo_suppkey = s_suppkey
  AND p_category = 'MFGR#12'
  AND s_region = 'AMERICA'
GROUP BY d_year, p_brand1
ORDER BY d_year, p_brand1;

-- id: Q2.2
SELECT sum(lo_revenue), d_year, p_brand1
FROM lineorder, dwdate, part, supplier
WHERE lo_orderdate = d_datekey
  AND lo_partkey = p_partkey
  AND lo_suppkey = s_suppkey
  AND p_brand1 BETWEEN 'MFGR#2221' AND 'MFGR#2228'
  AND s_region = 'ASIA'
GROUP BY d_year, p_brand1
ORDER BY d_year, p_brand1;

-- id: Q2.3
SELECT sum(lo_revenue), d_year, p_brand1
FROM lineorder, dwdate, part, supplier
WHERE lo_orderdate = d_datekey
  AND lo_partkey = p_partkey
  AND lo_suppkey = s_suppkey
  AND p_brand1 = 'MFGR#2239'
  AND s_region = 'EUROPE'
GROUP BY d_year, p_brand1
ORDER BY d_year, p_brand1;

-- id: Q3.1
SELECT c_nation, s_nation, d_year, sum(lo_revenue) AS revenue
FROM lineorder, customer, supplier, dwdate
WHERE lo_custkey = c_custkey
  AND lo_suppkey = s_suppkey
  AND lo_orderdate = d_datekey
  AND c_region = 'ASIA'
  AND s_region = 'ASIA'
  AND d_year >= 1992 AND d_year <= 1997
GROUP BY c_nation, s_nation, d_year
ORDER BY d_year ASC, revenue DESC;

-- id: Q3.2
SELECT c_city, s_city, d_year, sum(lo_revenue) AS revenue
FROM lineorder, customer, supplier, dwdate
WHERE lo_custkey = c_custkey
  AND lo_suppkey = s_suppkey
  AND lo_orderdate = d_datekey
  AND c_nation = 'UNITED STATES'
  AND s_nation = 'UNITED STATES'
  AND d_year >= 1992 AND d_year <= 1997
GROUP BY c_city, s_city, d_year
ORDER BY d_year ASC, revenue DESC;

-- id: Q3.3
SELECT c_city, s_city, d_year, sum(lo_revenue) AS revenue
FROM lineorder, customer, supplier, dwdate
WHERE lo_custkey = c_custkey
  AND lo_suppkey = s_suppkey
  AND lo_orderdate = d_datekey
  AND (c_city = 'UNITED KI1' OR c_city = 'UNITED KI5')
  AND (s_city = 'UNITED KI1' OR s_city = 'UNITED KI5')
  AND d_year >= 1992 AND d_year <= 1997
GROUP BY c_city, s_city, d_year
ORDER BY d_year ASC, revenue DESC;

-- id: Q3.4
SELECT c_city, s_city, d_year, sum(lo_revenue) AS revenue
FROM lineorder, customer, supplier, dwdate
WHERE lo_custkey = c_custkey
  AND lo_suppkey = s_suppkey
  AND lo_orderdate = d_datekey
  AND c_city IN ('UNITED KI1', 'UNITED KI5')
  AND s_city IN ('UNITED KI1', 'UNITED KI5')
  AND d_yearmonth = 'Dec1997'
GROUP BY c_city, s_city, d_year
ORDER BY d_year ASC, revenue DESC;

-- id: Q4.1
SELECT d_year, c_nation, sum(lo_revenue), sum(lo_supplycost)
FROM lineorder, dwdate, customer, supplier, part
WHERE lo_custkey = c_custkey
  AND lo_suppkey = s_suppkey
  AND lo_partkey = p_partkey
  AND lo_orderdate = d_datekey
  AND c_region = 'AMERICA'
  AND s_region = 'AMERICA'
  AND (p_mfgr = 'MFGR#1' OR p_mfgr = 'MFGR#2')
GROUP BY d_year, c_nation
ORDER BY d_year, c_nation;

-- id: Q4.2
SELECT d_year, s_nation, p_category, sum(lo_revenue), sum(lo_supplycost)
FROM lineorder, dwdate, customer, supplier, part
WHERE lo_custkey = c_custkey
  AND lo_suppkey = s_suppkey
  AND lo_partkey = p_partkey
  AND lo_orderdate = d_datekey
  AND c_region = 'AMERICA'
  AND s_region = 'AMERICA'
  AND d_year IN (1997, 1998)
  AND (p_mfgr = 'MFGR#1' OR p_mfgr = 'MFGR#2')
GROUP BY d_year, s_nation, p_category
ORDER BY d_year, s_nation, p_category;

-- id: Q4.3
SELECT d_year, s_city, p_brand1, sum(lo_revenue), sum(lo_supplycost)
FROM lineorder, dwdate, customer, supplier, part
WHERE lo_custkey = c_custkey
  AND lo_suppkey = s_suppkey
  AND lo_partkey = p_partkey
  AND lo_orderdate = d_datekey
  AND c_region = 'AMERICA'
  AND s_nation = 'UNITED STATES'
  AND d_year IN (1997, 1998)
  AND p_category = 'MFGR#14'
GROUP BY d_year, s_city, p_brand1
ORDER BY d_year, s_city, p_brand1;
";

/// The bundled workload parsed against the toy schema.
pub fn ssb_workload() -> Result<Vec<QueryShape>> {
    parse_workload(SSB_WORKLOAD_SQL, &ssb_schema_def())
}
