#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "covnet/error.hpp"
#include "covnet/jsonio.hpp"

namespace covnet {

// Reserved for the unnamed placeholder a rendered diagram uses for the
// suspected hidden participant; real actors may not use it.
inline constexpr const char* kCovertLabel = "?";

enum class DataFormat { jsonl, csv };

inline std::string to_string(DataFormat f) {
  return f == DataFormat::jsonl ? "jsonl" : "csv";
}

inline DataFormat parse_data_format(std::string_view s) {
  if (s == "jsonl") return DataFormat::jsonl;
  if (s == "csv") return DataFormat::csv;
  throw Error(ErrorKind::config, "unknown data format: " + std::string(s));
}

struct NodeId {
  std::string label;
  std::size_t index = 0;

  bool operator==(const NodeId&) const = default;
};

// One observed collective action. Participants are roster indices, stored
// ascending and free of duplicates.
struct IntelligenceRecord {
  std::string id;
  std::vector<std::size_t> participants;

  bool operator==(const IntelligenceRecord&) const = default;
};

// Parsed but not yet indexed record, as it appears in an input file.
struct RawRecord {
  std::string id;
  std::vector<std::string> participants;
};

struct Violation {
  std::optional<std::size_t> record;
  std::optional<std::size_t> node;
  std::string message;
};

struct Dataset {
  std::vector<IntelligenceRecord> records;  // file order
  std::vector<std::string> roster;          // ascending labels; index = position
  std::vector<std::uint8_t> incidence;      // row-major |d| x |n|

  std::size_t record_count() const { return records.size(); }
  std::size_t node_count() const { return roster.size(); }

  bool contains(std::size_t i, std::size_t j) const {
    return incidence[i * roster.size() + j] != 0;
  }

  const std::uint8_t* row(std::size_t i) const {
    return incidence.data() + i * roster.size();
  }

  std::optional<std::size_t> node_index(std::string_view label) const {
    auto it = std::lower_bound(roster.begin(), roster.end(), label);
    if (it == roster.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - roster.begin());
  }

  std::vector<std::string> participant_labels(std::size_t i) const {
    std::vector<std::string> out;
    out.reserve(records[i].participants.size());
    for (std::size_t j : records[i].participants) out.push_back(roster[j]);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

// Builds a Dataset from parsed records: dedups participants, derives the
// sorted roster, and fills the incidence matrix. When a declared roster is
// given (canonical files carry one) it must match the derived roster
// exactly; declared-but-unobserved nodes are rejected, not kept as isolates.
inline Dataset make_dataset(const std::vector<RawRecord>& raw,
                            const std::vector<std::string>* declared_roster = nullptr) {
  if (raw.empty()) {
    throw Error(ErrorKind::validation, "dataset has no records");
  }

  std::set<std::string> labels;
  std::set<std::string> seen_ids;
  for (const RawRecord& rec : raw) {
    if (rec.id.empty()) {
      throw Error(ErrorKind::validation, "record with empty id");
    }
    if (!seen_ids.insert(rec.id).second) {
      throw Error(ErrorKind::validation, "duplicate record id: " + rec.id);
    }
    if (rec.participants.empty()) {
      throw Error(ErrorKind::validation, "record " + rec.id + " has no participants");
    }
    for (const std::string& label : rec.participants) {
      if (label.empty()) {
        throw Error(ErrorKind::validation, "record " + rec.id + " names an empty participant label");
      }
      if (label == kCovertLabel) {
        throw Error(ErrorKind::validation,
                    "record " + rec.id + " uses the reserved label \"" + kCovertLabel + "\"");
      }
      labels.insert(label);
    }
  }

  Dataset ds;
  ds.roster.assign(labels.begin(), labels.end());

  if (declared_roster) {
    std::set<std::string> declared(declared_roster->begin(), declared_roster->end());
    for (const std::string& label : declared) {
      if (!labels.count(label)) {
        throw Error(ErrorKind::validation,
                    "roster declares node \"" + label + "\" that appears in no record");
      }
    }
    for (const std::string& label : ds.roster) {
      if (!declared.count(label)) {
        throw Error(ErrorKind::validation,
                    "node \"" + label + "\" appears in records but not in the declared roster");
      }
    }
  }

  const std::size_t n = ds.roster.size();
  ds.records.reserve(raw.size());
  ds.incidence.assign(raw.size() * n, 0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    IntelligenceRecord rec;
    rec.id = raw[i].id;
    std::set<std::size_t> members;
    for (const std::string& label : raw[i].participants) {
      members.insert(*ds.node_index(label));
    }
    rec.participants.assign(members.begin(), members.end());
    for (std::size_t j : rec.participants) ds.incidence[i * n + j] = 1;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

namespace detail {

inline std::string line_error(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

// Minimal CSV field scanner: supports RFC-style double quoting, splits on
// unquoted commas.
inline std::vector<std::string> split_csv_row(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t p = 0; p < line.size(); ++p) {
    char c = line[p];
    if (quoted) {
      if (c == '"') {
        if (p + 1 < line.size() && line[p + 1] == '"') {
          cur += '"';
          ++p;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) {
    throw Error(ErrorKind::parse, line_error(line_no, "unterminated quote"));
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace detail

// JSONL input: one object per line with "id" and "participants"; blank lines
// and '#' comment lines are skipped. An optional leading {"roster": [...]}
// header pins the node set (canonical serialization emits it).
inline Dataset parse_jsonl(const std::string& text) {
  std::vector<RawRecord> raw;
  std::optional<std::vector<std::string>> declared;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool first_object = true;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') {
      if (pos > text.size()) break;
      continue;
    }

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, detail::line_error(line_no, e.what()));
    }
    if (!obj.is_object()) {
      throw Error(ErrorKind::parse, detail::line_error(line_no, "expected a JSON object"));
    }

    if (first_object && obj.contains("roster")) {
      if (!obj["roster"].is_array()) {
        throw Error(ErrorKind::parse, detail::line_error(line_no, "\"roster\" must be an array"));
      }
      declared.emplace();
      for (const auto& v : obj["roster"]) {
        if (!v.is_string()) {
          throw Error(ErrorKind::parse, detail::line_error(line_no, "roster entries must be strings"));
        }
        declared->push_back(v.get<std::string>());
      }
      first_object = false;
      if (pos > text.size()) break;
      continue;
    }
    first_object = false;

    if (!obj.contains("id") || !obj["id"].is_string()) {
      throw Error(ErrorKind::parse, detail::line_error(line_no, "missing string field \"id\""));
    }
    if (!obj.contains("participants") || !obj["participants"].is_array()) {
      throw Error(ErrorKind::parse, detail::line_error(line_no, "missing array field \"participants\""));
    }
    RawRecord rec;
    rec.id = obj["id"].get<std::string>();
    for (const auto& v : obj["participants"]) {
      if (!v.is_string()) {
        throw Error(ErrorKind::parse, detail::line_error(line_no, "participants must be strings"));
      }
      rec.participants.push_back(v.get<std::string>());
    }
    raw.push_back(std::move(rec));
    if (pos > text.size()) break;
  }
  return make_dataset(raw, declared ? &*declared : nullptr);
}

// CSV input: header "id,participant", then one membership per row. Rows for
// the same id accumulate into one record, ordered by first appearance.
inline Dataset parse_csv(const std::string& text) {
  std::vector<RawRecord> raw;
  std::map<std::string, std::size_t> index_of;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') {
      if (pos > text.size()) break;
      continue;
    }
    std::vector<std::string> fields = detail::split_csv_row(line, line_no);
    if (!header_seen) {
      if (fields.size() != 2 || fields[0] != "id" || fields[1] != "participant") {
        throw Error(ErrorKind::parse,
                    detail::line_error(line_no, "expected header \"id,participant\""));
      }
      header_seen = true;
      if (pos > text.size()) break;
      continue;
    }
    if (fields.size() != 2) {
      throw Error(ErrorKind::parse, detail::line_error(line_no, "expected two fields"));
    }
    auto [it, inserted] = index_of.try_emplace(fields[0], raw.size());
    if (inserted) raw.push_back(RawRecord{fields[0], {}});
    raw[it->second].participants.push_back(fields[1]);
    if (pos > text.size()) break;
  }
  if (!header_seen) {
    throw Error(ErrorKind::parse, "empty csv input");
  }
  return make_dataset(raw);
}

inline Dataset parse_dataset(const std::string& text, DataFormat format) {
  return format == DataFormat::jsonl ? parse_jsonl(text) : parse_csv(text);
}

inline Dataset load_dataset(const std::string& path, DataFormat format) {
  return parse_dataset(jsonio::read_file(path), format);
}

// Canonical form: roster header line, then records in order with ascending
// participant labels. Byte-stable, so golden tests can compare output
// directly.
inline std::string serialize_canonical(const Dataset& ds) {
  std::string out = "{\"roster\":" + jsonio::string_array(ds.roster) + "}\n";
  for (const auto& rec : ds.records) {
    out += "{\"id\":" + jsonio::quoted(rec.id) + ",\"participants\":[";
    for (std::size_t m = 0; m < rec.participants.size(); ++m) {
      if (m) out += ",";
      out += jsonio::quoted(ds.roster[rec.participants[m]]);
    }
    out += "]}\n";
  }
  return out;
}

// Binary membership vector for record i over the whole roster.
inline std::vector<std::uint8_t> incidence_row(const Dataset& ds, std::size_t i) {
  if (i >= ds.record_count()) {
    throw Error(ErrorKind::validation,
                "record index " + std::to_string(i) + " out of range");
  }
  const std::uint8_t* r = ds.row(i);
  return std::vector<std::uint8_t>(r, r + ds.node_count());
}

// Re-derives every structural invariant and reports each breach; an empty
// result means the dataset is well formed.
inline std::vector<Violation> validate(const Dataset& ds) {
  std::vector<Violation> out;
  const std::size_t n = ds.roster.size();
  const std::size_t d = ds.records.size();

  if (d == 0) out.push_back({{}, {}, "dataset has no records"});
  if (n == 0) out.push_back({{}, {}, "dataset has an empty roster"});

  for (std::size_t j = 0; j < n; ++j) {
    if (ds.roster[j].empty()) {
      out.push_back({{}, j, "roster label at index " + std::to_string(j) + " is empty"});
    }
    if (ds.roster[j] == kCovertLabel) {
      out.push_back({{}, j, "roster uses the reserved label \"" + std::string(kCovertLabel) + "\""});
    }
    if (j > 0 && !(ds.roster[j - 1] < ds.roster[j])) {
      out.push_back({{}, j, "roster not in strictly ascending label order at index " + std::to_string(j)});
    }
  }

  std::set<std::string> ids;
  std::vector<std::size_t> appearances(n, 0);
  for (std::size_t i = 0; i < d; ++i) {
    const auto& rec = ds.records[i];
    if (rec.id.empty()) {
      out.push_back({i, {}, "record " + std::to_string(i) + " has an empty id"});
    } else if (!ids.insert(rec.id).second) {
      out.push_back({i, {}, "duplicate record id: " + rec.id});
    }
    if (rec.participants.empty()) {
      out.push_back({i, {}, "record " + rec.id + " has no participants"});
    }
    for (std::size_t m = 0; m < rec.participants.size(); ++m) {
      std::size_t j = rec.participants[m];
      if (j >= n) {
        out.push_back({i, j, "record " + rec.id + " references node index " + std::to_string(j) + " outside the roster"});
        continue;
      }
      ++appearances[j];
      if (m > 0 && rec.participants[m - 1] >= j) {
        out.push_back({i, j, "record " + rec.id + " participants not strictly ascending"});
      }
    }
  }

  if (ds.incidence.size() != d * n) {
    out.push_back({{}, {}, "incidence matrix has wrong shape"});
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      const auto& rec = ds.records[i];
      for (std::size_t j = 0; j < n; ++j) {
        bool member = std::binary_search(rec.participants.begin(), rec.participants.end(), j);
        bool bit = ds.incidence[i * n + j] != 0;
        if (member != bit) {
          out.push_back({i, j,
                         "incidence(" + std::to_string(i) + "," + std::to_string(j) +
                             ") disagrees with record membership"});
        }
      }
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    if (appearances[j] == 0) {
      out.push_back({{}, j, "node \"" + ds.roster[j] + "\" appears in no record"});
    }
  }
  return out;
}

// Non-fatal observations: legal datasets that will fit poorly.
inline std::vector<std::string> lint_warnings(const Dataset& ds) {
  std::vector<std::string> out;
  for (const auto& rec : ds.records) {
    if (rec.participants.size() == 1) {
      out.push_back("record " + rec.id +
                    " has a single participant; it constrains only the initiator weight");
    }
  }
  return out;
}

}  // namespace covnet
