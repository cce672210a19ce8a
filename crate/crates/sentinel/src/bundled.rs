//! Curated rule sets shipped with the tool, with the counts each file is
//! expected to contain.

use erc_sentinel_core::rules::{ContentCategory, Impact};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordedCounts {
    pub rules: usize,
    pub functions: usize,
    pub events: usize,
    /// privilege-check, functionality, usage, logging
    pub by_category: [usize; 4],
    /// high, medium, low
    pub by_impact: [usize; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct BundledRules {
    pub erc_id: &'static str,
    pub text: &'static str,
    pub counts: RecordedCounts,
}

pub const ERC20: BundledRules = BundledRules {
    erc_id: "ERC20",
    text: include_str!("../rules/erc20.yaml"),
    counts: RecordedCounts {
        rules: 35,
        functions: 9,
        events: 2,
        by_category: [3, 13, 10, 9],
        by_impact: [8, 18, 9],
    },
};

pub const ERC721: BundledRules = BundledRules {
    erc_id: "ERC721",
    text: include_str!("../rules/erc721.yaml"),
    counts: RecordedCounts {
        rules: 45,
        functions: 9,
        events: 3,
        by_category: [7, 18, 11, 9],
        by_impact: [21, 15, 9],
    },
};

pub const ERC1155: BundledRules = BundledRules {
    erc_id: "ERC1155",
    text: include_str!("../rules/erc1155.yaml"),
    counts: RecordedCounts {
        rules: 28,
        functions: 6,
        events: 4,
        by_category: [4, 8, 8, 8],
        by_impact: [13, 7, 8],
    },
};

pub const ERC3525: BundledRules = BundledRules {
    erc_id: "ERC3525",
    text: include_str!("../rules/erc3525.yaml"),
    counts: RecordedCounts {
        rules: 24,
        functions: 6,
        events: 3,
        by_category: [3, 8, 6, 7],
        by_impact: [8, 9, 7],
    },
};

pub const ALL: [BundledRules; 4] = [ERC20, ERC721, ERC1155, ERC3525];

/// Looks a bundled set up by ERC id, ignoring case (`erc20`, `ERC20`).
pub fn find(name: &str) -> Option<&'static BundledRules> {
    ALL.iter().find(|b| b.erc_id.eq_ignore_ascii_case(name.trim()))
}

pub fn category_index(c: ContentCategory) -> usize {
    match c {
        ContentCategory::PrivilegeCheck => 0,
        ContentCategory::Functionality => 1,
        ContentCategory::Usage => 2,
        ContentCategory::Logging => 3,
    }
}

pub fn impact_index(i: Impact) -> usize {
    match i {
        Impact::High => 0,
        Impact::Medium => 1,
        Impact::Low => 2,
    }
}
