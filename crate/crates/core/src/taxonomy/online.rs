//! Client for the live ESCO search API.

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

use super::{coarse_label_of_code, kind_of_code, ConceptKind, TaxonomyConcept};

pub const DEFAULT_BASE_URL: &str = "https://ec.europa.eu/esco/api";
pub const BASE_URL_ENV: &str = "KOMPET_ESCO_BASE_URL";

#[derive(Debug, Clone)]
pub struct EscoClientConfig {
    pub base_url: String,
    pub timeout: Duration,
    /// Maximum number of requests in flight across threads sharing the client.
    pub max_in_flight: usize,
}

impl Default for EscoClientConfig {
    fn default() -> Self {
        EscoClientConfig {
            base_url: std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string()),
            timeout: Duration::from_secs(10),
            max_in_flight: 2,
        }
    }
}

/// Blocking ESCO search client. Cheap to clone; clones share the in-flight limit.
#[derive(Clone)]
pub struct EscoClient {
    config: EscoClientConfig,
    agent: ureq::Agent,
    permits: Arc<(Mutex<usize>, Condvar)>,
}

struct Permit<'a>(&'a (Mutex<usize>, Condvar));

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let (lock, cvar) = self.0;
        *lock.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        cvar.notify_one();
    }
}

impl EscoClient {
    pub fn new(config: EscoClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Arc::new((Mutex::new(config.max_in_flight.max(1)), Condvar::new()));
        EscoClient {
            config,
            agent,
            permits,
        }
    }

    pub fn config(&self) -> &EscoClientConfig {
        &self.config
    }

    fn acquire(&self) -> Permit<'_> {
        let (lock, cvar) = &*self.permits;
        let mut free = lock.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = cvar.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(&self.permits)
    }

    /// Full request URL for a search; exposed for logging and tests.
    pub fn search_url(&self) -> String {
        format!("{}/search", self.config.base_url.trim_end_matches('/'))
    }

    /// One GET against the search endpoint. Results keep API order.
    ///
    /// Attitude concepts are filed under the `skill` type by the API, so a
    /// skill query may return attitudes and languages as well.
    pub fn fetch(
        &self,
        query: &str,
        kind: ConceptKind,
        language: &str,
        limit: usize,
    ) -> Result<Vec<TaxonomyConcept>> {
        let type_filter = match kind {
            ConceptKind::Knowledge => "knowledge",
            _ => "skill",
        };
        let url = self.search_url();
        let _permit = self.acquire();
        let response = self
            .agent
            .get(&url)
            .query("text", query)
            .query("language", language)
            .query("type", type_filter)
            .query("limit", limit.to_string())
            .query("full", "true")
            .header("Accept", "application/json")
            .call();
        let mut response = match response {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Error::Timeout(self.config.timeout)),
            Err(e) => return Err(Error::Network(e.to_string())),
        };
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::HttpStatus { status, url });
        }
        let body = response.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => Error::Timeout(self.config.timeout),
            other => Error::Network(other.to_string()),
        })?;
        let value: Value = serde_json::from_str(&body)
            .map_err(|e| Error::Network(format!("unparseable search response: {e}")))?;
        parse_search_response(&value, kind, language)
    }
}

/// Convert an ESCO search response into concepts.
pub fn parse_search_response(
    value: &Value,
    requested: ConceptKind,
    language: &str,
) -> Result<Vec<TaxonomyConcept>> {
    let results = match value.pointer("/_embedded/results") {
        None | Some(Value::Null) => return Ok(Vec::new()),
        Some(Value::Array(items)) => items,
        Some(_) => {
            return Err(Error::Network(
                "unparseable search response: results is not an array".into(),
            ))
        }
    };
    results
        .iter()
        .map(|item| concept_from_result(item, requested, language))
        .collect()
}

fn last_segment(uri: &str) -> &str {
    uri.trim_end_matches('/').rsplit('/').next().unwrap_or(uri)
}

fn string_map(value: Option<&Value>) -> BTreeMap<String, String> {
    value
        .and_then(Value::as_object)
        .map(|m| {
            m.iter()
                .filter_map(|(k, v)| {
                    let text = v
                        .as_str()
                        .or_else(|| v.get("literal").and_then(Value::as_str))?;
                    Some((k.clone(), text.to_string()))
                })
                .collect()
        })
        .unwrap_or_default()
}

fn broader_uris(item: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let direct = item.get("broaderHierarchyConcept");
    let linked = item.pointer("/_links/broaderHierarchyConcept");
    for source in [direct, linked].into_iter().flatten() {
        if let Some(items) = source.as_array() {
            for entry in items {
                if let Some(uri) = entry
                    .as_str()
                    .or_else(|| entry.get("uri").and_then(Value::as_str))
                {
                    out.push(uri.to_string());
                }
            }
        }
    }
    out
}

fn concept_from_result(
    item: &Value,
    requested: ConceptKind,
    language: &str,
) -> Result<TaxonomyConcept> {
    let uri = item
        .get("uri")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Network("unparseable search response: result without uri".into()))?;
    let code = last_segment(uri).to_string();

    let mut preferred_label = string_map(item.get("preferredLabel"));
    if !preferred_label.contains_key(language) {
        if let Some(title) = item.get("title").and_then(Value::as_str) {
            preferred_label.insert(language.to_string(), title.to_string());
        }
    }
    let alt_labels = item
        .get("alternativeLabel")
        .or_else(|| item.get("altLabels"))
        .and_then(Value::as_object)
        .map(|m| {
            m.iter()
                .map(|(lang, v)| {
                    let labels = v
                        .as_array()
                        .map(|a| a.iter().filter_map(|s| s.as_str().map(str::to_string)).collect())
                        .unwrap_or_default();
                    (lang.clone(), labels)
                })
                .collect()
        })
        .unwrap_or_default();
    let description = string_map(item.get("description")).remove(language);

    let parent_code = broader_uris(item)
        .iter()
        .map(|u| last_segment(u))
        .find(|c| coarse_label_of_code(c).is_ok())
        .map(str::to_string);

    let kind = if uri.contains("/isced-f/") {
        ConceptKind::Knowledge
    } else {
        kind_of_code(&code)
            .or_else(|| parent_code.as_deref().and_then(kind_of_code))
            .unwrap_or(requested)
    };

    Ok(TaxonomyConcept {
        code,
        uri: uri.to_string(),
        kind,
        preferred_label,
        alt_labels,
        description,
        parent_code,
    })
}
