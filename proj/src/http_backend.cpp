// Copyright 2026 The ConStruM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <httplib.h>

#include <algorithm>

#include "construm/error.hpp"
#include "construm/gateway.hpp"

namespace construm {

using nlohmann::json;

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

ParsedUrl parse_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw GatewayError("base URL needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? std::string() : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

void set_timeouts(httplib::Client& client, Seconds timeout) {
  auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();
  auto sec = static_cast<time_t>(usec / 1000000);
  auto rem = static_cast<time_t>(usec % 1000000);
  client.set_connection_timeout(sec, rem);
  client.set_read_timeout(sec, rem);
  client.set_write_timeout(sec, rem);
}

json post_json(const HttpEndpoint& endpoint, const std::string& suffix, const json& body,
               Seconds timeout) {
  auto url = parse_base_url(endpoint.base_url);
  httplib::Client client(url.origin);
  set_timeouts(client, timeout);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);
  auto res = client.Post(url.path + suffix, headers, body.dump(), "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Connection) {
      throw TransportError("HTTP " + httplib::to_string(res.error()) + " for " + endpoint.base_url + suffix);
    }
    throw TransportError("HTTP error " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("HTTP status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("malformed JSON response: ") + e.what());
  }
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  parse_base_url(endpoint_.base_url);
}

std::string HttpChatBackend::id() const {
  return "http:" + endpoint_.base_url + ":" + endpoint_.chat_model + ":" + endpoint_.decoding.dump();
}

ChatReply HttpChatBackend::complete(const ChatCall& call) {
  json body = endpoint_.decoding.is_object() ? endpoint_.decoding : json::object();
  body["model"] = endpoint_.chat_model;
  body["messages"] = json::array({{{"role", "user"}, {"content", call.prompt}}});
  json doc = post_json(endpoint_, "/chat/completions", body, call.timeout);
  ChatReply reply;
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    reply.text = content.is_string() ? content.get<std::string>() : std::string();
    if (doc.contains("usage")) {
      reply.prompt_tokens = doc["usage"].value("prompt_tokens", 0LL);
      reply.completion_tokens = doc["usage"].value("completion_tokens", 0LL);
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("unexpected chat response shape: ") + e.what());
  }
  return reply;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEndpoint endpoint, Seconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
  parse_base_url(endpoint_.base_url);
}

std::string HttpEmbeddingBackend::id() const {
  return "http:" + endpoint_.base_url + ":" + endpoint_.embedding_model;
}

std::vector<std::vector<double>> HttpEmbeddingBackend::embed(std::span<const std::string> texts) {
  json body = {{"model", endpoint_.embedding_model}, {"input", json(std::vector<std::string>(texts.begin(), texts.end()))}};
  json doc = post_json(endpoint_, "/embeddings", body, timeout_);
  std::vector<std::vector<double>> out(texts.size());
  try {
    const auto& data = doc.at("data");
    if (data.size() != texts.size()) throw TransportError("embedding response size mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::size_t index = data[i].value("index", i);
      if (index >= out.size()) throw TransportError("embedding response index out of range");
      out[index] = data[i].at("embedding").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("unexpected embedding response shape: ") + e.what());
  }
  std::size_t dim = out.front().size();
  for (const auto& v : out) {
    if (v.size() != dim) throw GatewayError("embedding dimension mismatch within batch");
  }
  return out;
}

}  // namespace construm
