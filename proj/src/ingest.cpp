#include "chatlines/ingest.hpp"

#include <cctype>
#include <fstream>

#include <json.hpp>

namespace chatlines {

namespace {

using nlohmann::json;

const char* kSchemaVersion = "1";

std::string require_string(const json& obj, const char* field) {
  if (!obj.contains(field) || !obj[field].is_string())
    throw DatasetError(std::string("missing or non-string field '") + field + "'");
  return obj[field].get<std::string>();
}

CodeListing parse_listing(const json& j) {
  if (!j.is_object()) throw DatasetError("listing is not an object");
  CodeListing listing;
  if (j.contains("language") && !j["language"].is_null())
    listing.language = j["language"].get<std::string>();
  listing.content = require_string(j, "content");
  if (listing.content.empty()) throw DatasetError("field 'content' is empty");
  return listing;
}

Turn parse_turn(const json& j) {
  if (!j.is_object()) throw DatasetError("turn is not an object");
  Turn turn;
  turn.prompt = require_string(j, "prompt");
  turn.answer = require_string(j, "answer");
  if (turn.prompt.empty() && turn.answer.empty())
    throw DatasetError("turn has empty 'prompt' and 'answer'");
  if (j.contains("listings")) {
    if (!j["listings"].is_array()) throw DatasetError("field 'listings' is not an array");
    for (const json& l : j["listings"]) turn.listings.push_back(parse_listing(l));
  }
  return turn;
}

Conversation parse_conversation(const json& j) {
  if (!j.is_object()) throw DatasetError("conversation is not an object");
  Conversation conv;
  conv.conversation_id = require_string(j, "conversation_id");
  if (!j.contains("turns") || !j["turns"].is_array())
    throw DatasetError("missing or non-array field 'turns'");
  for (const json& t : j["turns"]) conv.turns.push_back(parse_turn(t));
  if (conv.turns.empty()) throw DatasetError("field 'turns' is empty");
  return conv;
}

ChangeRecord parse_entry(const json& j) {
  if (!j.is_object()) throw DatasetError("entry is not an object");
  ChangeRecord rec;
  const std::string cat = require_string(j, "category");
  const auto parsed = parse_category(cat);
  if (!parsed) throw DatasetError("unknown value '" + cat + "' in field 'category'");
  rec.category = *parsed;
  rec.repo_url = require_string(j, "repo_url");
  rec.change_id = require_string(j, "change_id");
  if (rec.change_id.empty()) throw DatasetError("field 'change_id' is empty");

  if (j.contains("head_sha") && !j["head_sha"].is_null())
    rec.head_sha = j["head_sha"].get<std::string>();
  if (j.contains("base_branch") && !j["base_branch"].is_null())
    rec.base_branch = j["base_branch"].get<std::string>();
  if (j.contains("merged") && !j["merged"].is_null())
    rec.merged = j["merged"].get<bool>();
  if (j.contains("closes") && !j["closes"].is_null()) {
    const json& c = j["closes"];
    ChangeLink link;
    const std::string lcat = require_string(c, "category");
    const auto lp = parse_category(lcat);
    if (!lp) throw DatasetError("unknown value '" + lcat + "' in field 'closes.category'");
    link.category = *lp;
    link.change_id = require_string(c, "change_id");
    rec.closed_by = link;
  }

  if (j.contains("malformed_diagnostic") && j["malformed_diagnostic"].is_string()) {
    rec.status = RecordStatus::Malformed;
    rec.diagnostic = j["malformed_diagnostic"].get<std::string>();
    return rec;
  }

  if (!j.contains("conversations"))
    throw DatasetError("missing field 'conversations'");
  if (j["conversations"].is_null()) {
    rec.status = RecordStatus::ExpiredLink;
    return rec;
  }
  if (!j["conversations"].is_array())
    throw DatasetError("field 'conversations' is not an array");
  for (const json& c : j["conversations"])
    rec.conversations.push_back(parse_conversation(c));
  if (rec.conversations.empty())
    throw DatasetError("field 'conversations' is empty for a live entry");
  rec.status = RecordStatus::Live;
  return rec;
}

json entry_to_json(const ChangeRecord& rec) {
  json j;
  j["category"] = to_string(rec.category);
  j["repo_url"] = rec.repo_url;
  j["change_id"] = rec.change_id;
  if (rec.status == RecordStatus::Malformed) {
    j["conversations"] = json::array();
    j["malformed_diagnostic"] = rec.diagnostic;
    return j;
  }
  if (rec.status == RecordStatus::ExpiredLink) {
    j["conversations"] = nullptr;
  } else {
    json convs = json::array();
    for (const Conversation& conv : rec.conversations) {
      json turns = json::array();
      for (const Turn& turn : conv.turns) {
        json listings = json::array();
        for (const CodeListing& l : turn.listings) {
          listings.push_back({{"language", l.language ? json(*l.language) : json(nullptr)},
                              {"content", l.content}});
        }
        turns.push_back({{"prompt", turn.prompt},
                         {"answer", turn.answer},
                         {"listings", std::move(listings)}});
      }
      convs.push_back({{"conversation_id", conv.conversation_id},
                       {"turns", std::move(turns)}});
    }
    j["conversations"] = std::move(convs);
  }
  if (rec.head_sha) j["head_sha"] = *rec.head_sha;
  if (rec.base_branch) j["base_branch"] = *rec.base_branch;
  if (rec.merged) j["merged"] = *rec.merged;
  if (rec.closed_by) {
    j["closes"] = {{"category", to_string(rec.closed_by->category)},
                   {"change_id", rec.closed_by->change_id}};
  }
  return j;
}

}  // namespace

const char* to_string(Category c) {
  switch (c) {
    case Category::Commit: return "commit";
    case Category::PullRequest: return "pull_request";
    case Category::Issue: return "issue";
  }
  return "?";
}

const char* to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::Live: return "live";
    case RecordStatus::ExpiredLink: return "expired_link";
    case RecordStatus::Malformed: return "malformed";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view s) {
  if (s == "commit") return Category::Commit;
  if (s == "pull_request") return Category::PullRequest;
  if (s == "issue") return Category::Issue;
  return std::nullopt;
}

std::vector<ChangeRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read dataset file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DatasetError("dataset is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || !doc.contains("schema_version") ||
      !doc["schema_version"].is_string())
    throw DatasetError("dataset has no 'schema_version' string field");
  const std::string version = doc["schema_version"].get<std::string>();
  if (version != kSchemaVersion)
    throw DatasetError("unsupported schema_version: expected \"" +
                       std::string(kSchemaVersion) + "\", found \"" + version + "\"");
  if (!doc.contains("entries") || !doc["entries"].is_array())
    throw DatasetError("dataset has no 'entries' array");

  std::vector<ChangeRecord> records;
  for (const json& entry : doc["entries"]) {
    try {
      records.push_back(parse_entry(entry));
    } catch (const DatasetError& e) {
      ChangeRecord rec;
      rec.status = RecordStatus::Malformed;
      rec.diagnostic = e.what();
      if (entry.is_object()) {
        if (entry.contains("repo_url") && entry["repo_url"].is_string())
          rec.repo_url = entry["repo_url"].get<std::string>();
        if (entry.contains("change_id") && entry["change_id"].is_string())
          rec.change_id = entry["change_id"].get<std::string>();
        if (entry.contains("category") && entry["category"].is_string())
          if (auto c = parse_category(entry["category"].get<std::string>()))
            rec.category = *c;
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::string dataset_to_string(const std::vector<ChangeRecord>& records) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json entries = json::array();
  for (const ChangeRecord& rec : records) entries.push_back(entry_to_json(rec));
  doc["entries"] = std::move(entries);
  return doc.dump(2) + "\n";
}

void write_dataset(const std::filesystem::path& path,
                   const std::vector<ChangeRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write dataset file: " + path.string());
  out << dataset_to_string(records);
}

std::vector<ChangeRecord> filter_live(const std::vector<ChangeRecord>& records) {
  std::vector<ChangeRecord> live;
  for (const ChangeRecord& r : records)
    if (r.status == RecordStatus::Live) live.push_back(r);
  return live;
}

DatasetCounts count_statuses(const std::vector<ChangeRecord>& records) {
  DatasetCounts counts;
  for (const ChangeRecord& r : records) {
    switch (r.status) {
      case RecordStatus::Live: ++counts.live; break;
      case RecordStatus::ExpiredLink: ++counts.expired_link; break;
      case RecordStatus::Malformed: ++counts.malformed; break;
    }
  }
  return counts;
}

std::size_t token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

}  // namespace chatlines
