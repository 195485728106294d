#include "arbor/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace arbor {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotTerminal: return "NotTerminal";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::LogprobsUnsupported: return "LogprobsUnsupported";
    case ErrorKind::UnknownState: return "UnknownState";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::EmptyRollouts: return "EmptyRollouts";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::MissingValues: return "MissingValues";
    case ErrorKind::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::NoTerminalFound: return "NoTerminalFound";
    case ErrorKind::NoSolutions: return "NoSolutions";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DatasetMismatch: return "DatasetMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::Unexplored: return "unexplored";
    case NodeStatus::Expanded: return "expanded";
    case NodeStatus::Terminal: return "terminal";
  }
  return "unexplored";
}

ReasoningState ReasoningState::extend(Step step, std::string_view marker) const {
  ReasoningState next = *this;
  next.terminal_ = contains_marker(step.text, marker);
  next.steps_.push_back(std::move(step));
  return next;
}

std::string ReasoningState::text() const {
  std::string out = question_;
  for (const auto& s : steps_) {
    out += '\n';
    out += s.text;
  }
  return out;
}

namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

// Position of the last case-insensitive occurrence of needle, or npos.
std::size_t rfind_icase(std::string_view hay, std::string_view needle) {
  if (needle.empty() || needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t pos = hay.size() - needle.size() + 1; pos-- > 0;) {
    bool match = true;
    for (std::size_t k = 0; k < needle.size(); ++k) {
      if (lower(hay[pos + k]) != lower(needle[k])) {
        match = false;
        break;
      }
    }
    if (match) return pos;
  }
  return std::string_view::npos;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

}  // namespace

bool contains_marker(std::string_view text, std::string_view marker) {
  return rfind_icase(text, marker) != std::string_view::npos;
}

bool detect_terminal(const ReasoningState& state, std::string_view marker) {
  if (marker.empty()) throw Error(ErrorKind::InvalidArgument, "answer marker must be non-empty");
  if (state.empty()) return false;
  return contains_marker(state.last_step().text, marker);
}

std::string canonicalize_answer(std::string_view raw) {
  std::string_view s = trim(raw);
  while (!s.empty() && is_trailing_punct(s.back())) s = trim(s.substr(0, s.size() - 1));

  static const std::regex plain(R"(([+-]?)(\d+)(?:\.(\d+))?)");
  static const std::regex grouped(R"(([+-]?)(\d{1,3}(?:,\d{3})+)(?:\.(\d+))?)");
  std::string text(s);
  std::smatch m;
  if (!std::regex_match(text, m, plain) && !std::regex_match(text, m, grouped)) return text;

  std::string sign = m[1].str();
  std::string whole = m[2].str();
  std::string frac = m[3].matched ? m[3].str() : std::string();
  whole.erase(std::remove(whole.begin(), whole.end(), ','), whole.end());
  auto first_nonzero = whole.find_first_not_of('0');
  whole = first_nonzero == std::string::npos ? "0" : whole.substr(first_nonzero);
  while (!frac.empty() && frac.back() == '0') frac.pop_back();

  std::string out = whole;
  if (!frac.empty()) out += "." + frac;
  if (sign == "-" && out != "0") out = "-" + out;
  return out;
}

std::string extract_answer(const ReasoningState& state, std::string_view marker) {
  if (!detect_terminal(state, marker)) {
    throw Error(ErrorKind::NotTerminal, "state for problem '" + state.problem_id() +
                                            "' has no answer marker in its last step");
  }
  std::string_view text = state.last_step().text;
  std::size_t pos = rfind_icase(text, marker);
  std::string_view tail = trim(text.substr(pos + marker.size()));
  if (!tail.empty() && tail.front() == ':') tail = trim(tail.substr(1));
  return canonicalize_answer(tail);
}

bool answers_match(std::string_view a, std::string_view b) {
  return canonicalize_answer(a) == canonicalize_answer(b);
}

std::vector<Problem> parse_dataset(std::string_view jsonl) {
  std::vector<Problem> out;
  std::set<std::string> seen;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidArgument, "dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("question")) {
      throw Error(ErrorKind::InvalidArgument,
                  "dataset line " + std::to_string(lineno) + ": missing 'id' or 'question'");
    }
    Problem p;
    p.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    p.question = j["question"].get<std::string>();
    if (p.question.empty()) {
      throw Error(ErrorKind::InvalidArgument, "dataset line " + std::to_string(lineno) + ": empty question");
    }
    if (j.contains("answer") && !j["answer"].is_null()) {
      p.reference_answer = j["answer"].is_string() ? j["answer"].get<std::string>() : j["answer"].dump();
    }
    if (!seen.insert(p.id).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate problem id '" + p.id + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Problem> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open dataset " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

}  // namespace arbor
