#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "halpern/experiments.hpp"

namespace halpern {

namespace {

using nlohmann::json;

// Line of every value in a JSON text, keyed by JSON pointer. Only called on
// text nlohmann has already accepted, so it can assume well-formed input.
std::map<std::string, int> value_lines(const std::string& text) {
  struct Frame {
    bool is_array;
    std::size_t index;
    std::string key;
    std::string pointer;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  bool expect_key = false;

  auto escape = [](const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  };
  auto current_pointer = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.pointer + "/" + (f.is_array ? std::to_string(f.index) : escape(f.key));
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '{' || c == '[') {
      const std::string ptr = current_pointer();
      lines.emplace(ptr, line);
      stack.push_back(Frame{c == '[', 0, "", ptr});
      expect_key = c == '{';
    } else if (c == '}' || c == ']') {
      stack.pop_back();
      expect_key = false;
    } else if (c == ',') {
      if (!stack.empty() && stack.back().is_array) ++stack.back().index;
      else expect_key = true;
    } else if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s += text[i];
      }
      if (expect_key) {
        stack.back().key = s;
        expect_key = false;
      } else {
        lines.emplace(current_pointer(), line);
      }
    } else if (!std::isspace(static_cast<unsigned char>(c)) && c != ':') {
      lines.emplace(current_pointer(), line);
      while (i + 1 < text.size() && std::string(",]}\n \t\r").find(text[i + 1]) == std::string::npos) ++i;
    }
  }
  return lines;
}

class Locator {
 public:
  Locator(std::string name, std::map<std::string, int> lines) : name_(std::move(name)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& problem) const {
    std::string p = pointer;
    int line = 1;
    for (;;) {
      auto it = lines_.find(p);
      if (it != lines_.end()) {
        line = it->second;
        break;
      }
      const auto cut = p.rfind('/');
      if (cut == std::string::npos) break;
      p.resize(cut);
    }
    throw ConfigError(name_ + ":" + std::to_string(line) + ": " + (pointer.empty() ? "/" : pointer) + ": " + problem);
  }

 private:
  std::string name_;
  std::map<std::string, int> lines_;
};

int require_count(const json& doc, const char* key, const Locator& loc) {
  const std::string ptr = std::string("/") + key;
  if (!doc.contains(key)) loc.fail("", std::string("missing field \"") + key + "\"");
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 100000) {
    loc.fail(ptr, "must be an integer in [1, 100000]");
  }
  return static_cast<int>(v.get<long long>());
}

const json& require_array(const json& v, const std::string& ptr, std::size_t size, const Locator& loc) {
  if (!v.is_array()) loc.fail(ptr, "expected an array");
  if (v.size() != size) {
    loc.fail(ptr, "expected " + std::to_string(size) + " entries, found " + std::to_string(v.size()));
  }
  return v;
}

double require_number(const json& v, const std::string& ptr, const Locator& loc) {
  if (!v.is_number()) loc.fail(ptr, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) loc.fail(ptr, "must be finite");
  return x;
}

}  // namespace

TabularMDP parse_mdp_text(const std::string& text, const std::string& name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(name + ": " + e.what());
  }
  const Locator loc(name, value_lines(text));
  if (!doc.is_object()) loc.fail("", "expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "num_states" && key != "num_actions" && key != "transitions" && key != "rewards") {
      loc.fail("/" + key, "unknown field");
    }
  }
  const int S = require_count(doc, "num_states", loc);
  const int A = require_count(doc, "num_actions", loc);
  if (!doc.contains("transitions")) loc.fail("", "missing field \"transitions\"");
  if (!doc.contains("rewards")) loc.fail("", "missing field \"rewards\"");

  RowMatrix p(S * A, S);
  QTable r(S, A);
  const json& tr = require_array(doc.at("transitions"), "/transitions", S, loc);
  const json& rw = require_array(doc.at("rewards"), "/rewards", S, loc);
  for (int s = 0; s < S; ++s) {
    const std::string ts = "/transitions/" + std::to_string(s);
    const std::string rs = "/rewards/" + std::to_string(s);
    require_array(tr[s], ts, A, loc);
    require_array(rw[s], rs, A, loc);
    for (int a = 0; a < A; ++a) {
      const std::string rp = rs + "/" + std::to_string(a);
      const double reward = require_number(rw[s][a], rp, loc);
      if (reward < 0.0 || reward > 1.0) loc.fail(rp, "reward " + format_double(reward) + " outside [0, 1]");
      r(s, a) = reward;

      const std::string tp = ts + "/" + std::to_string(a);
      require_array(tr[s][a], tp, S, loc);
      double total = 0.0;
      for (int j = 0; j < S; ++j) {
        const std::string pp = tp + "/" + std::to_string(j);
        const double prob = require_number(tr[s][a][j], pp, loc);
        if (prob < 0.0) loc.fail(pp, "negative probability " + format_double(prob));
        p(s * A + a, j) = prob;
        total += prob;
      }
      if (std::abs(total - 1.0) > 1e-12) loc.fail(tp, "probabilities sum to " + format_double(total) + ", not 1");
    }
  }
  return TabularMDP(std::move(p), std::move(r));
}

TabularMDP load_mdp_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open MDP file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_mdp_text(buf.str(), path.string());
}

}  // namespace halpern
