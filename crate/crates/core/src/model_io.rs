//! Versioned JSON documents for trained trees and forests.
//!
//! Nodes are nested objects with their covers, so a saved model is enough
//! to recompute every explanation it produced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{ForestModel, ForestParams};
use crate::tree::{TreeDocument, TreeModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelDocument {
    Tree {
        format_version: u32,
        #[serde(flatten)]
        tree: TreeDocument,
    },
    Forest {
        format_version: u32,
        params: ForestParams,
        tree_seeds: Vec<u64>,
        trees: Vec<TreeDocument>,
    },
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Serialization(format!(
            "unsupported model format version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

pub fn tree_to_json(tree: &TreeModel) -> String {
    let doc = ModelDocument::Tree {
        format_version: FORMAT_VERSION,
        tree: tree.to_document(),
    };
    serde_json::to_string_pretty(&doc).expect("tree document serializes")
}

pub fn tree_from_json(text: &str) -> Result<TreeModel> {
    match serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))? {
        ModelDocument::Tree {
            format_version,
            tree,
        } => {
            check_version(format_version)?;
            TreeModel::from_document(tree)
        }
        ModelDocument::Forest { .. } => Err(Error::Serialization(
            "expected a tree, found a forest".into(),
        )),
    }
}

pub fn forest_to_json(forest: &ForestModel) -> String {
    let doc = ModelDocument::Forest {
        format_version: FORMAT_VERSION,
        params: forest.params,
        tree_seeds: forest.tree_seeds.clone(),
        trees: forest.trees.iter().map(TreeModel::to_document).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("forest document serializes")
}

pub fn forest_from_json(text: &str) -> Result<ForestModel> {
    match serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))? {
        ModelDocument::Forest {
            format_version,
            params,
            tree_seeds,
            trees,
        } => {
            check_version(format_version)?;
            let trees = trees
                .into_iter()
                .map(TreeModel::from_document)
                .collect::<Result<Vec<_>>>()?;
            if tree_seeds.len() != trees.len() {
                return Err(Error::Serialization(
                    "tree_seeds length does not match trees".into(),
                ));
            }
            let mut forest = ForestModel::from_trees(trees, params.vote)?;
            forest.tree_seeds = tree_seeds;
            forest.params = params;
            Ok(forest)
        }
        ModelDocument::Tree { .. } => Err(Error::Serialization(
            "expected a forest, found a tree".into(),
        )),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
