use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PayloadError {
    #[error("no JSON object found in response")]
    NoObject,
    #[error("response JSON is missing key `{0}`")]
    MissingKey(String),
}

/// The first well-formed JSON object in `response` that holds every key in
/// `required_keys`. Prose and code fences around the object are ignored.
pub fn parse_json_payload(response: &str, required_keys: &[&str]) -> Result<Map<String, Value>, PayloadError> {
    let mut first_object = None;
    for (start, _) in response.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&response[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            if required_keys.iter().all(|k| map.contains_key(*k)) {
                return Ok(map);
            }
            first_object.get_or_insert(map);
        }
    }
    match first_object {
        None => Err(PayloadError::NoObject),
        Some(map) => {
            let missing = required_keys.iter().find(|k| !map.contains_key(**k)).unwrap();
            Err(PayloadError::MissingKey(missing.to_string()))
        }
    }
}
