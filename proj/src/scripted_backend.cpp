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

#include <fstream>

#include "construm/error.hpp"
#include "construm/gateway.hpp"
#include "construm/text.hpp"

namespace construm {

using nlohmann::json;

namespace {

std::vector<std::string> string_list(const json& rule, const char* key) {
  std::vector<std::string> out;
  if (!rule.contains(key)) return out;
  const auto& v = rule.at(key);
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& item : v) out.push_back(item.get<std::string>());
  } else {
    throw ParseError(std::string("rules.") + key, "expected string or list of strings");
  }
  return out;
}

}  // namespace

ScriptedChatBackend::ScriptedChatBackend(const json& script) {
  if (!script.is_object()) throw ParseError("script", "expected JSON object");
  if (script.contains("rules")) {
    const auto& rules = script.at("rules");
    if (!rules.is_array()) throw ParseError("script.rules", "expected array");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const auto& r = rules[i];
      if (!r.contains("reply") || !r.at("reply").is_string()) {
        throw ParseError("script.rules[" + std::to_string(i) + "]", "missing string \"reply\"");
      }
      Rule rule;
      if (r.contains("role")) rule.role = parse_call_role(r.at("role").get<std::string>());
      rule.all = string_list(r, "all");
      for (auto& s : string_list(r, "contains")) rule.all.push_back(std::move(s));
      rule.none = string_list(r, "none");
      rule.reply = r.at("reply").get<std::string>();
      rules_.push_back(std::move(rule));
    }
  }
  if (script.contains("defaults")) {
    for (const auto& [role, reply] : script.at("defaults").items()) {
      defaults_[parse_call_role(role)] = reply.get<std::string>();
    }
  }
  std::string hash = text::sha256_hex(script.dump()).substr(0, 16);
  id_ = "scripted:" + script.value("id", std::string("script")) + ":" + hash;
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open script file");
  json script;
  try {
    script = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
  return std::make_shared<ScriptedChatBackend>(script);
}

std::string ScriptedChatBackend::reply_for(CallRole role, std::string_view prompt) const {
  for (const auto& rule : rules_) {
    if (rule.role && *rule.role != role) continue;
    bool ok = true;
    for (const auto& s : rule.all) {
      if (!text::contains(prompt, s)) {
        ok = false;
        break;
      }
    }
    for (const auto& s : rule.none) {
      if (!ok) break;
      if (text::contains(prompt, s)) ok = false;
    }
    if (ok) return rule.reply;
  }
  if (auto it = defaults_.find(role); it != defaults_.end()) return it->second;
  std::string head(prompt.substr(0, 120));
  throw ScriptMissError("scripted backend has no rule for " + std::string(to_string(role)) +
                        " prompt starting \"" + head + "\"");
}

ChatReply ScriptedChatBackend::complete(const ChatCall& call) {
  ChatReply reply;
  reply.text = reply_for(call.role, call.prompt);
  reply.prompt_tokens = text::count_tokens(call.prompt);
  reply.completion_tokens = text::count_tokens(reply.text);
  return reply;
}

}  // namespace construm
