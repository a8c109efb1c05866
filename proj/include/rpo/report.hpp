#pragma once

// Seed input, the multi-host scan driver, line-delimited records and the
// per-technique summary.

#include "rpo/error.hpp"
#include "rpo/http.hpp"
#include "rpo/page_analysis.hpp"
#include "rpo/scanner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rpo {

class SeedError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct SeedEntry {
    WebUrl url;
    std::optional<long> rank;
    std::optional<std::string> doctype;
    std::size_t line = 0;
};

// One URL per line, optionally followed by a tab and a rank, and optionally
// another tab and the page's doctype. Blank lines and '#' comments are skipped.
inline std::vector<SeedEntry> parse_seed(std::istream& in)
{
    std::vector<SeedEntry> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#')
            continue;
        auto fields = detail::split(line, '\t');
        SeedEntry entry;
        entry.line = number;
        try {
            entry.url = parse_url(fields[0]);
        } catch (const MalformedUrl& e) {
            throw SeedError("seed line " + std::to_string(number) + ": " + e.what());
        }
        entry.url.fragment.reset();
        if (fields.size() > 1 && !detail::trim(fields[1]).empty()) {
            auto text = std::string(detail::trim(fields[1]));
            std::size_t used = 0;
            try {
                entry.rank = std::stol(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != text.size())
                throw SeedError("seed line " + std::to_string(number) + ": rank '" + text + "' is not an integer");
        }
        if (fields.size() > 2 && !detail::trim(fields[2]).empty())
            entry.doctype = std::string(detail::trim(fields[2]));
        if (fields.size() > 3)
            throw SeedError("seed line " + std::to_string(number) + ": too many fields");
        out.push_back(std::move(entry));
    }
    return out;
}

// "HOST<TAB>name=value; name2=value2" per line.
inline std::map<std::string, CookieJar> parse_cookie_seed(std::istream& in)
{
    std::map<std::string, CookieJar> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        auto trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#')
            continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw SeedError("cookie line " + std::to_string(number) + ": expected HOST<TAB>cookies");
        auto host = detail::lowercase(detail::trim(std::string_view(line).substr(0, tab)));
        for (auto& [k, v] : parse_cookie_header(std::string_view(line).substr(tab + 1)))
            out[host][k] = v;
    }
    return out;
}

enum class RecordStatus {
    NotScanned,
    GroupedInto,
    NotVulnerable,
    Vulnerable,
    Exploitable,
};

inline constexpr std::array<RecordStatus, 5> all_record_statuses { RecordStatus::NotScanned, RecordStatus::GroupedInto,
    RecordStatus::NotVulnerable, RecordStatus::Vulnerable, RecordStatus::Exploitable };

inline std::string_view record_status_name(RecordStatus s)
{
    switch (s) {
    case RecordStatus::NotScanned:
        return "NotScanned";
    case RecordStatus::GroupedInto:
        return "GroupedInto";
    case RecordStatus::NotVulnerable:
        return "NotVulnerable";
    case RecordStatus::Vulnerable:
        return "Vulnerable";
    case RecordStatus::Exploitable:
        return "Exploitable";
    }
    return "?";
}

struct ScanRecord {
    std::string url;
    std::string site;
    std::string template_key;
    std::optional<long> rank;
    RecordStatus status = RecordStatus::NotScanned;
    // EthicsBlocked, the representative URL for GroupedInto, or a
    // NotVulnerable reason.
    std::optional<std::string> reason;
    std::optional<std::string> technique;
    std::optional<std::string> newline_variant;
    std::optional<std::string> mutated_url;
    std::optional<std::string> reflected_stylesheet_url;
    std::map<std::string, ProfileResult> profile_results;
    std::string started;
    std::string finished;
    std::vector<std::string> notes;
};

inline std::string utc_timestamp()
{
    auto now = std::chrono::system_clock::now();
    auto t = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm {};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    char frac[8];
    std::snprintf(frac, sizeof(frac), ".%03dZ", static_cast<int>(ms));
    return std::string(buf) + frac;
}

inline nlohmann::json to_json(const ScanRecord& r)
{
    auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json profiles = nlohmann::json::object();
    for (const auto& [key, result] : r.profile_results) {
        nlohmann::json blockers = nlohmann::json::array();
        for (auto b : result.blockers)
            blockers.push_back(blocker_name(b));
        profiles[key] = { { "exploitable", result.exploitable }, { "framed", result.framed }, { "blockers", blockers } };
        if (!result.error.empty())
            profiles[key]["error"] = result.error;
    }
    return {
        { "url", r.url },
        { "site", r.site },
        { "template", r.template_key },
        { "rank", opt(r.rank) },
        { "status", record_status_name(r.status) },
        { "reason", opt(r.reason) },
        { "technique", opt(r.technique) },
        { "newline_variant", opt(r.newline_variant) },
        { "mutated_url", opt(r.mutated_url) },
        { "reflected_stylesheet_url", opt(r.reflected_stylesheet_url) },
        { "profile_results", profiles },
        { "started", r.started },
        { "finished", r.finished },
        { "notes", r.notes },
    };
}

inline ScanRecord record_from_json(const nlohmann::json& j)
{
    auto opt = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j.at(key).is_null())
            return std::nullopt;
        return j.at(key).get<std::string>();
    };
    ScanRecord r;
    try {
        r.url = j.at("url").get<std::string>();
        r.site = j.value("site", "");
        r.template_key = j.value("template", "");
        if (j.contains("rank") && !j.at("rank").is_null())
            r.rank = j.at("rank").get<long>();
        r.status = parse_enum_name(j.at("status").get<std::string>(), all_record_statuses, record_status_name);
        r.reason = opt("reason");
        r.technique = opt("technique");
        r.newline_variant = opt("newline_variant");
        r.mutated_url = opt("mutated_url");
        r.reflected_stylesheet_url = opt("reflected_stylesheet_url");
        if (j.contains("profile_results")) {
            for (const auto& [key, value] : j.at("profile_results").items()) {
                ProfileResult p;
                p.exploitable = value.at("exploitable").get<bool>();
                p.framed = value.value("framed", false);
                for (const auto& b : value.value("blockers", nlohmann::json::array()))
                    p.blockers.push_back(parse_enum_name(b.get<std::string>(), all_blockers, blocker_name));
                p.error = value.value("error", "");
                r.profile_results[key] = p;
            }
        }
        r.started = j.value("started", "");
        r.finished = j.value("finished", "");
        r.notes = j.value("notes", std::vector<std::string> {});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad record: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("bad record: ") + e.what());
    }
    return r;
}

inline std::vector<ScanRecord> read_records(std::istream& in)
{
    std::vector<ScanRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (detail::trim(line).empty())
            continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("record line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

// Safe for concurrent writers; each record is written and flushed whole.
class RecordSink {
public:
    explicit RecordSink(std::function<void(const ScanRecord&)> consumer)
        : m_consumer(std::move(consumer))
    {
    }

    void write(const ScanRecord& record)
    {
        std::lock_guard lock(m_mutex);
        m_consumer(record);
        ++m_count;
    }

    std::size_t count() const
    {
        std::lock_guard lock(m_mutex);
        return m_count;
    }

private:
    std::function<void(const ScanRecord&)> m_consumer;
    mutable std::mutex m_mutex;
    std::size_t m_count = 0;
};

inline std::function<void(const ScanRecord&)> jsonl_writer(std::ostream& out)
{
    return [&out](const ScanRecord& r) { out << to_json(r).dump() << '\n' << std::flush; };
}

inline ScanRecord base_record(const SeedEntry& entry)
{
    ScanRecord r;
    r.url = entry.url.serialize();
    r.site = registrable_domain(entry.url.host);
    r.template_key = template_of({ entry.url, entry.doctype }).abstract_url;
    r.rank = entry.rank;
    return r;
}

inline ScanRecord scan_to_record(const SeedEntry& entry, const CookieJar& cookies, HttpClient& client, const ScanConfig& config)
{
    auto record = base_record(entry);
    record.started = utc_timestamp();
    try {
        auto verdict = scan_page(entry.url, cookies, client, config);
        if (verdict.status == VerdictStatus::Vulnerable)
            verdict = verify_exploitable(verdict, client, config);
        record.status = verdict.status == VerdictStatus::Exploitable ? RecordStatus::Exploitable
            : verdict.status == VerdictStatus::Vulnerable            ? RecordStatus::Vulnerable
                                                                     : RecordStatus::NotVulnerable;
        if (verdict.reason)
            record.reason = std::string(reason_name(*verdict.reason));
        if (verdict.technique)
            record.technique = std::string(technique_name(*verdict.technique));
        if (verdict.newline)
            record.newline_variant = std::string(newline_code(*verdict.newline));
        record.mutated_url = verdict.mutated_url;
        record.reflected_stylesheet_url = verdict.reflected_stylesheet_url;
        record.profile_results = verdict.profile_results;
        record.notes = verdict.notes;
    } catch (const Error& e) {
        record.status = RecordStatus::NotVulnerable;
        record.reason = "Error";
        record.notes.push_back(e.what());
    }
    record.finished = utc_timestamp();
    return record;
}

// Blocked seeds and non-representative group members get records without any
// traffic. Representatives are scanned with at most max_concurrent_hosts
// hosts in flight; one host's pages are handled by a single worker.
inline void run_scan(const std::vector<SeedEntry>& seeds, const std::map<std::string, CookieJar>& cookies, HttpClient& client,
    const ScanConfig& config, RecordSink& sink)
{
    validate(config);
    std::vector<const SeedEntry*> allowed;
    for (const auto& entry : seeds) {
        if (ethics_gate(entry.url, config)) {
            allowed.push_back(&entry);
            continue;
        }
        auto r = base_record(entry);
        r.status = RecordStatus::NotScanned;
        r.reason = "EthicsBlocked";
        r.started = r.finished = utc_timestamp();
        sink.write(r);
    }

    std::vector<CandidatePage> pages;
    for (const auto* entry : allowed)
        pages.push_back({ entry->url, entry->doctype });
    auto groups = group_candidates(pages);

    std::map<std::string, std::vector<const SeedEntry*>> by_host;
    std::set<std::string> scheduled;
    for (const auto* entry : allowed) {
        const auto& representative = groups.at(template_of({ entry->url, entry->doctype }));
        auto key = entry->url.serialize();
        if (representative == entry->url && scheduled.insert(key + "\n" + template_of({ entry->url, entry->doctype }).doctype_key.value_or("")).second) {
            by_host[entry->url.authority()].push_back(entry);
            continue;
        }
        auto r = base_record(*entry);
        r.status = RecordStatus::GroupedInto;
        r.reason = representative.serialize();
        r.started = r.finished = utc_timestamp();
        sink.write(r);
    }

    std::deque<std::vector<const SeedEntry*>> queue;
    for (auto& [host, entries] : by_host)
        queue.push_back(std::move(entries));
    std::mutex queue_mutex;
    auto worker = [&] {
        while (true) {
            std::vector<const SeedEntry*> batch;
            {
                std::lock_guard lock(queue_mutex);
                if (queue.empty())
                    return;
                batch = std::move(queue.front());
                queue.pop_front();
            }
            for (const auto* entry : batch) {
                auto it = cookies.find(entry->url.host);
                static const CookieJar none;
                sink.write(scan_to_record(*entry, it == cookies.end() ? none : it->second, client, config));
            }
        }
    };
    auto n = std::min<std::size_t>(static_cast<std::size_t>(config.max_concurrent_hosts), queue.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n; ++i)
        threads.emplace_back(worker);
    for (auto& t : threads)
        t.join();
}

// Summary columns in output order.
inline const std::vector<std::pair<Engine, std::string>>& summary_engines()
{
    static const std::vector<std::pair<Engine, std::string>> engines {
        { Engine::Chrome, "chrome" },
        { Engine::Opera, "opera" },
        { Engine::Safari, "safari" },
        { Engine::Firefox, "firefox" },
        { Engine::Edge, "edge" },
        { Engine::InternetExplorer, "internet_explorer" },
    };
    return engines;
}

// A page counts as exploitable for an engine if any evaluation of it (framed
// or not) succeeded.
inline bool exploitable_under(const ScanRecord& r, Engine engine)
{
    for (bool framed : { false, true }) {
        auto it = r.profile_results.find(result_key(engine, framed));
        if (it != r.profile_results.end() && it->second.exploitable)
            return true;
    }
    return false;
}

struct SummaryCount {
    std::size_t pages = 0;
    std::size_t sites = 0;

    friend bool operator==(const SummaryCount&, const SummaryCount&) = default;
};

struct SummaryRow {
    std::string technique;
    SummaryCount vulnerable;
    std::map<Engine, SummaryCount> exploitable;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct SummaryTable {
    SummaryCount candidates;
    std::vector<SummaryRow> rows;

    friend bool operator==(const SummaryTable&, const SummaryTable&) = default;
};

inline SummaryTable summarize(const std::vector<ScanRecord>& records)
{
    struct Sets {
        std::set<std::string> pages, sites;
        SummaryCount count() const { return { pages.size(), sites.size() }; }
    };
    SummaryTable table;
    Sets candidates;
    std::vector<std::string> names;
    for (auto t : all_techniques)
        names.emplace_back(technique_name(t));
    names.emplace_back("Total");
    std::map<std::string, Sets> vulnerable;
    std::map<std::string, std::map<Engine, Sets>> exploitable;

    for (const auto& r : records) {
        if (r.status == RecordStatus::NotScanned || r.status == RecordStatus::GroupedInto)
            continue;
        candidates.pages.insert(r.url);
        candidates.sites.insert(r.site);
        bool hit = r.status == RecordStatus::Vulnerable || r.status == RecordStatus::Exploitable;
        if (!hit || !r.technique)
            continue;
        for (const auto& row : { *r.technique, std::string("Total") }) {
            vulnerable[row].pages.insert(r.url);
            vulnerable[row].sites.insert(r.site);
            for (const auto& [engine, label] : summary_engines()) {
                if (exploitable_under(r, engine)) {
                    exploitable[row][engine].pages.insert(r.url);
                    exploitable[row][engine].sites.insert(r.site);
                }
            }
        }
    }
    table.candidates = candidates.count();
    for (const auto& name : names) {
        SummaryRow row;
        row.technique = name;
        row.vulnerable = vulnerable[name].count();
        for (const auto& [engine, label] : summary_engines())
            row.exploitable[engine] = exploitable[name][engine].count();
        table.rows.push_back(row);
    }
    return table;
}

inline std::string summary_csv(const SummaryTable& table)
{
    std::ostringstream out;
    out << "technique,vulnerable_pages,vulnerable_sites";
    for (const auto& [engine, label] : summary_engines())
        out << ",exploitable_pages_" << label << ",exploitable_sites_" << label;
    out << "\n";
    for (const auto& row : table.rows) {
        out << row.technique << "," << row.vulnerable.pages << "," << row.vulnerable.sites;
        for (const auto& [engine, label] : summary_engines())
            out << "," << row.exploitable.at(engine).pages << "," << row.exploitable.at(engine).sites;
        out << "\n";
    }
    return out.str();
}

namespace detail {

inline std::string with_percent(std::size_t n, std::size_t total)
{
    char buf[48];
    double pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(total);
    std::snprintf(buf, sizeof(buf), "%zu (%.1f%%)", n, pct);
    return buf;
}

} // namespace detail

inline std::string summary_text(const SummaryTable& table)
{
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header { "technique", "vulnerable pages", "vulnerable sites" };
    for (const auto& [engine, label] : summary_engines()) {
        header.push_back(label + " pages");
        header.push_back(label + " sites");
    }
    cells.push_back(header);
    for (const auto& row : table.rows) {
        std::vector<std::string> line { row.technique, detail::with_percent(row.vulnerable.pages, table.candidates.pages),
            detail::with_percent(row.vulnerable.sites, table.candidates.sites) };
        for (const auto& [engine, label] : summary_engines()) {
            line.push_back(detail::with_percent(row.exploitable.at(engine).pages, table.candidates.pages));
            line.push_back(detail::with_percent(row.exploitable.at(engine).sites, table.candidates.sites));
        }
        cells.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i)
            width[i] = std::max(width[i], line[i].size());
    }
    std::ostringstream out;
    out << "candidate set: " << table.candidates.pages << " pages, " << table.candidates.sites << " sites\n";
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            out << line[i] << std::string(width[i] - line[i].size(), ' ');
            out << (i + 1 < line.size() ? "  " : "\n");
        }
    }
    return out.str();
}

} // namespace rpo
