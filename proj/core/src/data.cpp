#include "seqrec/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "seqrec/errors.hpp"

namespace seqrec {

namespace {

using nlohmann::json;

bool parse_i64(const std::string& s, int64_t* out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    *out = v;
    return true;
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, delim)) out.push_back(field);
    return out;
}

std::string id_from_json(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<int64_t>());
    return {};
}

bool parse_delimited(const std::string& line, char delim, Interaction* out) {
    auto f = split_fields(line, delim);
    if (f.size() < 3 || f[0].empty() || f[1].empty()) return false;
    int64_t ts;
    if (parse_i64(f[2], &ts)) {
        *out = {f[0], f[1], ts};
        return true;
    }
    // 4-field logs sometimes carry (user, item, rating, timestamp); accept
    // when the third field is not an integer but the fourth is.
    if (f.size() >= 4 && parse_i64(f[3], &ts)) {
        *out = {f[0], f[1], ts};
        return true;
    }
    return false;
}

bool parse_jsonl(const std::string& line, Interaction* out) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return false;
    if (!j.contains("user") || !j.contains("item") || !j.contains("timestamp")) return false;
    std::string user = id_from_json(j["user"]);
    std::string item = id_from_json(j["item"]);
    if (user.empty() || item.empty() || !j["timestamp"].is_number_integer()) return false;
    *out = {user, item, j["timestamp"].get<int64_t>()};
    return true;
}

SequenceExample make_example(int user, const std::vector<int>& history, size_t context_len,
                             int target, int n_max) {
    SequenceExample ex;
    ex.user = user;
    ex.target = target;
    size_t keep = std::min(context_len, static_cast<size_t>(n_max));
    ex.true_length = static_cast<int>(keep);
    ex.items.assign(static_cast<size_t>(n_max), 0);
    for (size_t i = 0; i < keep; ++i)
        ex.items[static_cast<size_t>(n_max) - keep + i] = history[context_len - keep + i];
    return ex;
}

json example_to_json(const SequenceExample& ex) {
    return json{{"user", ex.user},
                {"items", ex.items},
                {"true_length", ex.true_length},
                {"target", ex.target}};
}

SequenceExample example_from_json(const json& j) {
    SequenceExample ex;
    ex.user = j.at("user").get<int>();
    ex.items = j.at("items").get<std::vector<int>>();
    ex.true_length = j.at("true_length").get<int>();
    ex.target = j.at("target").get<int>();
    return ex;
}

void write_jsonl(const std::string& path, const std::vector<SequenceExample>& examples) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path);
    for (const auto& ex : examples) os << example_to_json(ex).dump() << '\n';
}

std::vector<SequenceExample> read_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read " + path);
    std::vector<SequenceExample> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(example_from_json(json::parse(line)));
    }
    return out;
}

}  // namespace

LogFormat format_from_name(const std::string& name) {
    if (name == "csv") return LogFormat::Csv;
    if (name == "tsv") return LogFormat::Tsv;
    if (name == "jsonl" || name == "json-lines") return LogFormat::JsonLines;
    throw ConfigError("unknown input format: " + name);
}

std::vector<Interaction> ingest(const std::string& path, LogFormat format, IngestReport* report) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path);
    std::vector<Interaction> out;
    IngestReport rep;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Interaction it;
        bool ok = format == LogFormat::JsonLines
                      ? parse_jsonl(line, &it)
                      : parse_delimited(line, format == LogFormat::Csv ? ',' : '\t', &it);
        if (ok && it.timestamp >= 0) {
            out.push_back(std::move(it));
            ++rep.parsed;
        } else {
            ++rep.malformed;
        }
    }
    if (report) *report = rep;
    if (out.empty()) throw DataError("zero valid records in " + path);
    return out;
}

std::vector<Interaction> five_core_filter(std::vector<Interaction> interactions, int k) {
    bool changed = true;
    while (changed) {
        std::unordered_map<std::string, int> user_count, item_count;
        for (const auto& it : interactions) {
            ++user_count[it.user_id];
            ++item_count[it.item_id];
        }
        std::vector<Interaction> kept;
        kept.reserve(interactions.size());
        for (auto& it : interactions)
            if (user_count[it.user_id] >= k && item_count[it.item_id] >= k)
                kept.push_back(std::move(it));
        changed = kept.size() != interactions.size();
        interactions = std::move(kept);
    }
    return interactions;
}

DatasetSplits build_splits(const std::vector<Interaction>& interactions, int n_max) {
    if (n_max < 1) throw ConfigError("n_max must be >= 1");
    DatasetSplits out;
    out.n_max = n_max;
    out.total_actions = static_cast<int64_t>(interactions.size());

    // Ids assigned in first-appearance order for determinism.
    std::vector<std::vector<std::pair<int64_t, int>>> per_user;  // (timestamp, item id)
    for (const auto& it : interactions) {
        auto [ui, unew] = out.catalog.user_index.try_emplace(
            it.user_id, static_cast<int>(out.catalog.user_names.size()) + 1);
        if (unew) {
            out.catalog.user_names.push_back(it.user_id);
            per_user.emplace_back();
        }
        auto [ii, inew] = out.catalog.item_index.try_emplace(
            it.item_id, static_cast<int>(out.catalog.item_names.size()) + 1);
        if (inew) out.catalog.item_names.push_back(it.item_id);
        per_user[static_cast<size_t>(ui->second - 1)].emplace_back(it.timestamp, ii->second);
    }

    for (size_t u = 0; u < per_user.size(); ++u) {
        auto& events = per_user[u];
        std::stable_sort(events.begin(), events.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        size_t len = events.size();
        if (len < 3)
            throw DataError("user " + out.catalog.user_names[u] + " has " + std::to_string(len) +
                            " interactions; at least 3 required for the split");
        std::vector<int> seq(len);
        for (size_t i = 0; i < len; ++i) seq[i] = events[i].second;
        int user = static_cast<int>(u) + 1;
        for (size_t t = 1; t + 2 < len; ++t)
            out.train.push_back(make_example(user, seq, t, seq[t], n_max));
        out.validation.push_back(make_example(user, seq, len - 2, seq[len - 2], n_max));
        out.test.push_back(make_example(user, seq, len - 1, seq[len - 1], n_max));
    }
    return out;
}

DatasetStats stats(const DatasetSplits& splits) {
    DatasetStats s;
    s.users = splits.catalog.num_users();
    s.items = splits.catalog.num_items();
    s.actions = splits.total_actions;
    s.avg_length = s.users ? static_cast<double>(s.actions) / static_cast<double>(s.users) : 0.0;
    double cells = static_cast<double>(s.users) * static_cast<double>(s.items);
    s.sparsity = cells > 0.0 ? 1.0 - static_cast<double>(s.actions) / cells : 0.0;
    return s;
}

void save_splits(const DatasetSplits& splits, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_jsonl(dir + "/train.jsonl", splits.train);
    write_jsonl(dir + "/validation.jsonl", splits.validation);
    write_jsonl(dir + "/test.jsonl", splits.test);
    json cat;
    cat["items"] = splits.catalog.item_names;
    cat["users"] = splits.catalog.user_names;
    cat["n_max"] = splits.n_max;
    cat["total_actions"] = splits.total_actions;
    std::ofstream os(dir + "/catalog.json");
    if (!os) throw DataError("cannot write " + dir + "/catalog.json");
    os << cat.dump(2) << '\n';
}

DatasetSplits load_splits(const std::string& dir) {
    DatasetSplits out;
    std::ifstream is(dir + "/catalog.json");
    if (!is) throw DataError("cannot read " + dir + "/catalog.json");
    json cat = json::parse(is);
    out.catalog.item_names = cat.at("items").get<std::vector<std::string>>();
    out.catalog.user_names = cat.at("users").get<std::vector<std::string>>();
    for (size_t i = 0; i < out.catalog.item_names.size(); ++i)
        out.catalog.item_index[out.catalog.item_names[i]] = static_cast<int>(i) + 1;
    for (size_t i = 0; i < out.catalog.user_names.size(); ++i)
        out.catalog.user_index[out.catalog.user_names[i]] = static_cast<int>(i) + 1;
    out.n_max = cat.at("n_max").get<int>();
    out.total_actions = cat.at("total_actions").get<int64_t>();
    out.train = read_jsonl(dir + "/train.jsonl");
    out.validation = read_jsonl(dir + "/validation.jsonl");
    out.test = read_jsonl(dir + "/test.jsonl");
    return out;
}

std::string stats_json(const DatasetStats& s) {
    std::ostringstream pct;
    pct << std::fixed << std::setprecision(2) << s.sparsity * 100.0 << '%';
    json j;
    j["users"] = s.users;
    j["items"] = s.items;
    j["actions"] = s.actions;
    j["avg_length"] = s.avg_length;
    j["sparsity"] = pct.str();
    j["sparsity_fraction"] = s.sparsity;
    return j.dump(2);
}

}  // namespace seqrec
