/*
 * Copyright 2026 The Hybrid Replay Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hr/text_io.hpp"

#include <charconv>
#include <istream>

#include "hr/error.hpp"

namespace hr {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorKind::kData, "cannot format value");
  return std::string(buf, end);
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    return std::nullopt;
  }
  return value;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  text = trim(text);
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    return std::nullopt;
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view text) {
  const char* ws = " \t\r\n";
  auto b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = text.find_last_not_of(ws);
  return text.substr(b, e - b + 1);
}

std::string next_token(std::istream& in, const char* what) {
  std::string token;
  if (!(in >> token)) fail(ErrorKind::kData, std::string("truncated record: expected ") + what);
  return token;
}

double next_double(std::istream& in, const char* what) {
  auto token = next_token(in, what);
  auto value = parse_double(token);
  if (!value) fail(ErrorKind::kData, std::string("bad number for ") + what + ": '" + token + "'");
  return *value;
}

std::int64_t next_int(std::istream& in, const char* what) {
  auto token = next_token(in, what);
  auto value = parse_int(token);
  if (!value) fail(ErrorKind::kData, std::string("bad integer for ") + what + ": '" + token + "'");
  return *value;
}

void expect_header(std::istream& in, std::string_view magic) {
  std::string token;
  if (!(in >> token) || token != magic) {
    fail(ErrorKind::kVersion, "expected header " + std::string(magic) + ", found '" +
                                  token.substr(0, 32) + "'");
  }
}

}  // namespace hr
