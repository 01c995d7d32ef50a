use std::time::Duration;

use serde_json::{json, Value};

use super::{LlmError, Provider, ProviderConfig, RawCompletion};

/// Chat-completion provider speaking JSON over HTTP(S).
pub struct HttpProvider {
    name: String,
    endpoint: String,
    model: String,
    temperature: Option<f64>,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    /// Fails with `AuthError` when the key variable is unset; no request is made.
    pub fn new(cfg: &ProviderConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::AuthError { var: cfg.api_key_env.clone() })?;
        Ok(HttpProvider::with_key(cfg, api_key))
    }

    pub fn with_key(cfg: &ProviderConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider {
            name: cfg.name.clone(),
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            api_key,
            agent,
        }
    }

    fn request_body(&self, prompt: &str) -> String {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        body.to_string()
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn call(&self, prompt: &str) -> Result<RawCompletion, LlmError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(self.request_body(prompt))
            .map_err(|e| LlmError::TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::TransportError(e.to_string()))?;
        match status {
            200..=299 => parse_response(&body),
            401 | 403 => Err(LlmError::Unauthorized { status }),
            429 => Err(LlmError::RateLimited),
            500..=599 => Err(LlmError::TransportError(format!("HTTP {status}"))),
            _ => Err(LlmError::Http { status, body }),
        }
    }
}

fn parse_response(body: &str) -> Result<RawCompletion, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    let text = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| LlmError::BadResponse("no choices[0].message.content".into()))?
        .to_string();
    let usage = match (v["usage"]["prompt_tokens"].as_u64(), v["usage"]["completion_tokens"].as_u64()) {
        (Some(p), Some(c)) => Some((p, c)),
        _ => None,
    };
    Ok(RawCompletion { text, usage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one canned response per entry and returns the request bodies.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    fn cfg(endpoint: String) -> ProviderConfig {
        ProviderConfig { endpoint, name: "http".into(), model: "m1".into(), ..ProviderConfig::mock() }
    }

    #[test]
    fn round_trip_against_local_server() {
        let ok = r#"{"choices":[{"message":{"content":"as__a: assert property (a |-> b);"}}],"usage":{"prompt_tokens":2000,"completion_tokens":500}}"#;
        let (url, handle) = serve(vec![(200, ok.to_string())]);
        let p = HttpProvider::with_key(&cfg(url), "k".into());
        let raw = p.call("hello").unwrap();
        assert_eq!(raw.text, "as__a: assert property (a |-> b);");
        assert_eq!(raw.usage, Some((2000, 500)));
        let bodies = handle.join().unwrap();
        let sent: Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(sent["model"], "m1");
        assert_eq!(sent["messages"][0]["content"], "hello");
        assert_eq!(sent["messages"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn status_mapping() {
        let (url, handle) = serve(vec![(429, "{}".into()), (401, "{}".into()), (400, "bad".into())]);
        let p = HttpProvider::with_key(&cfg(url), "k".into());
        assert_eq!(p.call("x"), Err(LlmError::RateLimited));
        assert_eq!(p.call("x"), Err(LlmError::Unauthorized { status: 401 }));
        assert_eq!(p.call("x"), Err(LlmError::Http { status: 400, body: "bad".into() }));
        handle.join().unwrap();
    }

    #[test]
    fn missing_key_fails_before_network() {
        let c = ProviderConfig { api_key_env: "SVA_FORGE_TEST_UNSET_KEY_VAR".into(), ..cfg("http://127.0.0.1:1".into()) };
        assert!(matches!(HttpProvider::new(&c), Err(LlmError::AuthError { .. })));
    }
}
