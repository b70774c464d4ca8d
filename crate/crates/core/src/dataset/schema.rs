use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered feature identifiers. Column `i` of any matrix carrying this schema
/// means `names[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    raw_width: usize,
}

/// The 40 flow features kept after zero-variance removal, in reference order.
pub const CICIOT_FEATURES: [&str; 40] = [
    "flow_duration",
    "Header_Length",
    "Protocol Type",
    "Duration",
    "Rate",
    "Srate",
    "fin_flag_number",
    "syn_flag_number",
    "rst_flag_number",
    "psh_flag_number",
    "ack_flag_number",
    "ack_count",
    "syn_count",
    "fin_count",
    "urg_count",
    "rst_count",
    "HTTP",
    "HTTPS",
    "DNS",
    "SSH",
    "TCP",
    "UDP",
    "ARP",
    "ICMP",
    "IPv",
    "LLC",
    "Tot sum",
    "Min",
    "Max",
    "AVG",
    "Std",
    "Tot size",
    "IAT",
    "Number",
    "Magnitude",
    "Radius",
    "Covariance",
    "Variance",
    "Weight",
    "DHCP",
];

/// Columns present in the raw CSV shards that carry no variance.
pub const CICIOT_CONSTANT_FEATURES: [&str; 6] = [
    "Drate",
    "ece_flag_number",
    "cwr_flag_number",
    "Telnet",
    "SMTP",
    "IRC",
];

/// Header spellings found in the published shards, mapped to schema names.
const HEADER_ALIASES: [(&str, &str); 1] = [("Magnitue", "Magnitude")];

pub const LABEL_COLUMN: &str = "label";

impl FeatureSchema {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let width = names.len();
        Self::with_raw_width(names, width)
    }

    pub fn with_raw_width(names: Vec<String>, raw_width: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{n}`")));
            }
            if n == LABEL_COLUMN {
                return Err(Error::Schema("`label` is reserved for the label column".into()));
            }
        }
        Ok(Self { names, raw_width })
    }

    /// Raw 46-column layout: the 40 reference features with the six constant
    /// columns interleaved where the shards carry them.
    pub fn ciciot_raw() -> Self {
        let mut names: Vec<String> = Vec::with_capacity(46);
        for f in CICIOT_FEATURES {
            match f {
                "fin_flag_number" => names.push("Drate".into()),
                "ack_count" => {
                    names.push("ece_flag_number".into());
                    names.push("cwr_flag_number".into());
                }
                "SSH" => {
                    names.push("Telnet".into());
                    names.push("SMTP".into());
                }
                "TCP" => names.push("IRC".into()),
                _ => {}
            }
            names.push(f.into());
        }
        Self::new(names).expect("static schema is valid")
    }

    /// The 40-feature reference schema (raw width 46).
    pub fn ciciot() -> Self {
        Self::with_raw_width(CICIOT_FEATURES.iter().map(|s| s.to_string()).collect(), 46)
            .expect("static schema is valid")
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn raw_width(&self) -> usize {
        self.raw_width
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Schema restricted to `kept` (in the given order).
    pub fn select(&self, kept: &[usize]) -> Self {
        Self {
            names: kept.iter().map(|&i| self.names[i].clone()).collect(),
            raw_width: self.raw_width,
        }
    }

    pub(crate) fn canonical_header(name: &str) -> &str {
        let trimmed = name.trim();
        HEADER_ALIASES
            .iter()
            .find(|(alias, _)| *alias == trimmed)
            .map(|(_, canon)| *canon)
            .unwrap_or(trimmed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelLevel {
    Subcategory,
    Class,
    Binary,
}

impl std::str::FromStr for LabelLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subcategory" => Ok(Self::Subcategory),
            "class" => Ok(Self::Class),
            "binary" => Ok(Self::Binary),
            other => Err(Error::Parameter(format!("unknown label level `{other}`"))),
        }
    }
}

pub const BINARY_NAMES: [&str; 2] = ["benign", "attack"];

/// Three-level labeling: raw subcategory -> class -> benign/attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTaxonomy {
    class_of: BTreeMap<String, String>,
    benign_class: String,
}

const CICIOT_TAXONOMY: [(&str, &str); 34] = [
    ("BenignTraffic", "Benign"),
    ("DDoS-ACK_Fragmentation", "DDoS"),
    ("DDoS-HTTP_Flood", "DDoS"),
    ("DDoS-ICMP_Flood", "DDoS"),
    ("DDoS-ICMP_Fragmentation", "DDoS"),
    ("DDoS-PSHACK_Flood", "DDoS"),
    ("DDoS-RSTFINFlood", "DDoS"),
    ("DDoS-SYN_Flood", "DDoS"),
    ("DDoS-SlowLoris", "DDoS"),
    ("DDoS-SynonymousIP_Flood", "DDoS"),
    ("DDoS-TCP_Flood", "DDoS"),
    ("DDoS-UDP_Flood", "DDoS"),
    ("DDoS-UDP_Fragmentation", "DDoS"),
    ("DoS-HTTP_Flood", "DoS"),
    ("DoS-SYN_Flood", "DoS"),
    ("DoS-TCP_Flood", "DoS"),
    ("DoS-UDP_Flood", "DoS"),
    ("Mirai-greeth_flood", "Mirai"),
    ("Mirai-greip_flood", "Mirai"),
    ("Mirai-udpplain", "Mirai"),
    ("Recon-HostDiscovery", "Recon"),
    ("Recon-OSScan", "Recon"),
    ("Recon-PingSweep", "Recon"),
    ("Recon-PortScan", "Recon"),
    ("VulnerabilityScan", "Recon"),
    ("DNS_Spoofing", "Spoofing"),
    ("MITM-ArpSpoofing", "Spoofing"),
    ("BrowserHijacking", "Web"),
    ("CommandInjection", "Web"),
    ("SqlInjection", "Web"),
    ("XSS", "Web"),
    ("Uploading_Attack", "Web"),
    ("Backdoor_Malware", "Web"),
    ("DictionaryBruteForce", "Bruteforce"),
];

impl LabelTaxonomy {
    pub fn new(class_of: BTreeMap<String, String>, benign_class: impl Into<String>) -> Result<Self> {
        let benign_class = benign_class.into();
        if !class_of.values().any(|c| *c == benign_class) {
            return Err(Error::Parameter(format!(
                "benign class `{benign_class}` has no subcategory"
            )));
        }
        Ok(Self {
            class_of,
            benign_class,
        })
    }

    /// CICIoT2023: 34 subcategories (33 attacks + benign) in 8 classes.
    pub fn ciciot2023() -> Self {
        let class_of = CICIOT_TAXONOMY
            .iter()
            .map(|(s, c)| (s.to_string(), c.to_string()))
            .collect();
        Self::new(class_of, "Benign").expect("static taxonomy is valid")
    }

    pub fn subcategory_names(&self) -> Vec<String> {
        self.class_of.keys().cloned().collect()
    }

    /// Class names in lexicographic order.
    pub fn class_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.class_of.values().cloned().collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn benign_class(&self) -> &str {
        &self.benign_class
    }

    pub fn subcategories_of(&self, class: &str) -> Vec<String> {
        self.class_of
            .iter()
            .filter(|(_, c)| *c == class)
            .map(|(s, _)| s.clone())
            .collect()
    }

    /// Class of a raw label. Class names are accepted as their own class.
    pub fn class_of(&self, label: &str) -> Option<&str> {
        if let Some(c) = self.class_of.get(label) {
            return Some(c);
        }
        self.class_of
            .values()
            .find(|c| c.as_str() == label)
            .map(|c| c.as_str())
    }

    pub fn binary_of(&self, label: &str) -> Option<u8> {
        self.class_of(label)
            .map(|c| u8::from(c != self.benign_class))
    }

    pub fn is_known(&self, label: &str) -> bool {
        self.class_of(label).is_some()
    }

    /// Sorted names at a level; the position is the integer encoding.
    pub fn names_at(&self, level: LabelLevel) -> Vec<String> {
        match level {
            LabelLevel::Subcategory => self.subcategory_names(),
            LabelLevel::Class => self.class_names(),
            LabelLevel::Binary => BINARY_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Name of `label` at `level`.
    pub fn name_at(&self, label: &str, level: LabelLevel) -> Option<String> {
        match level {
            LabelLevel::Subcategory => self.class_of.contains_key(label).then(|| label.to_string()),
            LabelLevel::Class => self.class_of(label).map(str::to_string),
            LabelLevel::Binary => self.binary_of(label).map(|b| BINARY_NAMES[b as usize].to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_schema_has_46_columns_and_reduces_to_table_order() {
        let raw = FeatureSchema::ciciot_raw();
        assert_eq!(raw.width(), 46);
        let kept: Vec<usize> = (0..46)
            .filter(|&i| !CICIOT_CONSTANT_FEATURES.contains(&raw.name(i)))
            .collect();
        let reduced = raw.select(&kept);
        assert_eq!(reduced.names(), FeatureSchema::ciciot().names());
        assert_eq!(reduced.name(15), "rst_count");
        assert_eq!(reduced.name(32), "IAT");
        assert_eq!(reduced.name(37), "Variance");
        assert_eq!(reduced.name(1), "Header_Length");
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(FeatureSchema::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn taxonomy_shape() {
        let t = LabelTaxonomy::ciciot2023();
        assert_eq!(t.subcategory_names().len(), 34);
        assert_eq!(
            t.class_names(),
            ["Benign", "Bruteforce", "DDoS", "DoS", "Mirai", "Recon", "Spoofing", "Web"]
        );
        for s in t.subcategory_names() {
            let b = t.binary_of(&s).unwrap();
            assert_eq!(b == 0, s == "BenignTraffic");
        }
        assert_eq!(t.class_of("Benign"), Some("Benign"));
        assert_eq!(t.binary_of("DDoS-ICMP_Flood"), Some(1));
        assert!(!t.is_known("NotARealAttack"));
    }
}
