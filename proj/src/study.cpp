#include "facesync/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <httplib.h>

#include "json.hpp"

namespace facesync {

using json = nlohmann::json;

std::string to_string(Criterion c) { return c == Criterion::believability ? "believability" : "coordination"; }

Criterion parse_criterion(std::string_view s) {
  if (s == "believability") return Criterion::believability;
  if (s == "coordination") return Criterion::coordination;
  throw DataError("unknown criterion '" + std::string(s) + "'");
}

namespace {
constexpr std::array<Criterion, 2> kBlocks{Criterion::believability, Criterion::coordination};

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) s.replace(p, from.size(), to);
}
}  // namespace

void StudyConfig::validate() const {
  auto fail = [](const std::string& m) { throw DataError("study config: " + m); };
  if (sequences.empty()) fail("no sequences");
  if (conditions.size() < 2) fail("at least two conditions are needed");
  if (std::set<std::string>(sequences.begin(), sequences.end()).size() != sequences.size())
    fail("duplicate sequence id");
  if (std::set<std::string>(conditions.begin(), conditions.end()).size() != conditions.size())
    fail("duplicate condition");
  for (const auto& s : sequences)
    for (const auto& c : conditions)
      for (Criterion k : kBlocks)
        if (video_uri(s, c, k).empty())
          fail("no video for " + s + "/" + c + "/" + to_string(k));
}

std::string StudyConfig::video_uri(const std::string& sequence, const std::string& condition, Criterion c) const {
  if (auto it = videos.find(sequence + "/" + condition + "/" + to_string(c)); it != videos.end()) return it->second;
  std::string uri = video_pattern;
  replace_all(uri, "{sequence}", sequence);
  replace_all(uri, "{condition}", condition);
  replace_all(uri, "{criterion}", to_string(c));
  return uri;
}

std::string to_ndjson_line(const RatingRecord& r) {
  return json{{"participant_id", r.participant_id},
              {"criterion", to_string(r.criterion)},
              {"sequence_id", r.sequence_id},
              {"condition", r.condition},
              {"score", r.score},
              {"page_index", r.page_index},
              {"position", r.position},
              {"timestamp_ms", r.timestamp_ms}}
      .dump();
}

RatingRecord parse_ndjson_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    RatingRecord r;
    r.participant_id = j.at("participant_id").get<std::string>();
    r.criterion = parse_criterion(j.at("criterion").get<std::string>());
    r.sequence_id = j.at("sequence_id").get<std::string>();
    r.condition = j.at("condition").get<std::string>();
    r.score = j.at("score").get<int>();
    r.page_index = j.value("page_index", std::size_t{0});
    r.position = j.value("position", std::size_t{0});
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    if (r.score < kScaleMin || r.score > kScaleMax) throw DataError("score out of range");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("rating record: ") + e.what());
  }
}

SessionState create_session(const StudyConfig& config, std::mt19937_64& rng, std::string participant_id) {
  config.validate();
  SessionState s;
  s.participant_id = std::move(participant_id);
  for (Criterion c : kBlocks) {
    auto seqs = config.sequences;
    std::shuffle(seqs.begin(), seqs.end(), rng);
    for (const auto& seq : seqs) {
      StudyPage p{c, seq, config.conditions};
      std::shuffle(p.condition_order.begin(), p.condition_order.end(), rng);
      s.pages.push_back(std::move(p));
    }
  }
  return s;
}

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void RecordStore::append(std::span<const RatingRecord> records) {
  std::string chunk;
  for (const auto& r : records) chunk += to_ndjson_line(r) + "\n";
  std::lock_guard lock(mutex_);
  std::ofstream os(path_, std::ios::app | std::ios::binary);
  if (!os) throw DataError("cannot open record store " + path_.string());
  os.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  os.flush();
  if (!os) throw DataError("failed to append to record store " + path_.string());
}

std::vector<RatingRecord> RecordStore::load() const {
  std::lock_guard lock(mutex_);
  return load_records(path_);
}

std::vector<RatingRecord> load_records(const std::filesystem::path& path) {
  std::vector<RatingRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream is(path);
  if (!is) throw DataError("cannot read record store " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_ndjson_line(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RatingRecord> submit_page(SessionState& session, std::size_t page_index,
                                      std::span<const PageRating> ratings, RecordStore& store,
                                      std::int64_t timestamp_ms) {
  if (page_index < session.page_index) throw StudyRejection("navigation locked");
  if (session.completed) throw StudyRejection("session already completed");
  if (page_index > session.page_index)
    throw StudyRejection("page " + std::to_string(page_index) + " is not the current page (" +
                         std::to_string(session.page_index) + ")");
  const StudyPage& page = session.pages[page_index];
  if (ratings.size() != page.condition_order.size())
    throw StudyRejection("expected " + std::to_string(page.condition_order.size()) + " ratings, got " +
                         std::to_string(ratings.size()));
  std::set<std::string> seen;
  for (const auto& r : ratings) {
    if (std::find(page.condition_order.begin(), page.condition_order.end(), r.condition) ==
        page.condition_order.end())
      throw StudyRejection("unknown condition '" + r.condition + "'");
    if (!seen.insert(r.condition).second) throw StudyRejection("duplicate rating for condition " + r.condition);
    if (r.score < kScaleMin || r.score > kScaleMax)
      throw StudyRejection("score " + std::to_string(r.score) + " for " + r.condition + " is outside [0, 100]");
  }
  std::vector<RatingRecord> records;
  for (std::size_t pos = 0; pos < page.condition_order.size(); ++pos) {
    const auto& cond = page.condition_order[pos];
    const auto it = std::find_if(ratings.begin(), ratings.end(), [&](const PageRating& r) { return r.condition == cond; });
    records.push_back({session.participant_id, page.criterion, page.sequence_id, cond, it->score, page_index, pos,
                       timestamp_ms});
  }
  store.append(records);
  ++session.page_index;
  session.completed = session.page_index == session.pages.size();
  return records;
}

// ------------------------------------------------------------- analysis

std::vector<RatingRecord> complete_sessions(std::span<const RatingRecord> records, std::size_t expected) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.participant_id];
  std::vector<RatingRecord> out;
  for (const auto& r : records)
    if (counts[r.participant_id] == expected) out.push_back(r);
  return out;
}

namespace {

// participant -> mean over sequences, for one (criterion, condition) cell
std::map<std::string, double> participant_means(std::span<const RatingRecord> records, Criterion criterion,
                                                const std::string& condition) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : records)
    if (r.criterion == criterion && r.condition == condition) {
      auto& a = acc[r.participant_id];
      a.first += r.score;
      ++a.second;
    }
  std::map<std::string, double> out;
  for (const auto& [p, a] : acc) out[p] = a.first / static_cast<double>(a.second);
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace

std::vector<CellStats> descriptive_stats(std::span<const RatingRecord> records,
                                         std::span<const std::string> conditions) {
  std::vector<CellStats> out;
  for (Criterion c : kBlocks)
    for (const auto& cond : conditions) {
      CellStats s;
      s.criterion = c;
      s.condition = cond;
      std::vector<double> v;
      for (const auto& kv : participant_means(records, c, cond)) v.push_back(kv.second);
      s.participants = v.size();
      s.empty = v.empty();
      if (!s.empty) std::tie(s.mean, s.std) = mean_std(v);
      out.push_back(s);
    }
  return out;
}

std::vector<std::vector<double>> score_matrix(std::span<const RatingRecord> records, Criterion criterion,
                                              std::span<const std::string> conditions,
                                              std::vector<std::string>* participants) {
  std::set<std::string> ids;
  for (const auto& r : records)
    if (r.criterion == criterion) ids.insert(r.participant_id);
  std::vector<std::map<std::string, double>> cols;
  for (const auto& c : conditions) cols.push_back(participant_means(records, criterion, c));
  std::vector<std::vector<double>> m;
  std::string missing;
  for (const auto& p : ids) {
    std::vector<double> row;
    for (std::size_t j = 0; j < conditions.size(); ++j) {
      auto it = cols[j].find(p);
      if (it == cols[j].end())
        missing += " (" + p + ", " + conditions[j] + ")";
      else
        row.push_back(it->second);
    }
    m.push_back(std::move(row));
  }
  if (!missing.empty())
    throw DataError("incomplete design for " + to_string(criterion) + "; missing cells:" + missing);
  if (participants) participants->assign(ids.begin(), ids.end());
  return m;
}

std::string significance_mark(double p) {
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "ns";
}

PairwiseComparison paired_comparison(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired comparison: samples differ in size");
  if (a.size() < 2) throw DataError("paired comparison: need at least two participants");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  const auto [m, sd] = mean_std(d);
  PairwiseComparison r;
  r.df = d.size() - 1;
  r.mean_difference = m;
  double scale = 0.0;
  for (double x : d) scale = std::max(scale, std::abs(x));
  if (sd <= 1e-12 * std::max(scale, 1.0)) {
    if (std::abs(m) <= 1e-12 * std::max(scale, 1.0)) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = m > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
  } else {
    r.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
    const boost::math::students_t dist(static_cast<double>(r.df));
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  }
  r.significance = significance_mark(r.p);
  return r;
}

AnovaResult rm_anova(std::span<const RatingRecord> records, Criterion criterion,
                     std::span<const std::string> conditions) {
  const auto x = score_matrix(records, criterion, conditions);
  const std::size_t n = x.size(), k = conditions.size();
  if (n < 2) throw DataError("rm-anova: need at least two participants, got " + std::to_string(n));
  if (k < 2) throw DataError("rm-anova: need at least two conditions");
  AnovaResult r;
  r.criterion = criterion;
  r.participants = n;
  double gm = 0.0;
  for (const auto& row : x)
    for (double v : row) gm += v;
  gm /= static_cast<double>(n * k);
  std::vector<double> cm(k, 0.0), sm(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      cm[j] += x[i][j] / static_cast<double>(n);
      sm[i] += x[i][j] / static_cast<double>(k);
      r.ss_total += (x[i][j] - gm) * (x[i][j] - gm);
    }
  for (double m : cm) r.ss_conditions += static_cast<double>(n) * (m - gm) * (m - gm);
  for (double m : sm) r.ss_subjects += static_cast<double>(k) * (m - gm) * (m - gm);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double e = x[i][j] - cm[j] - sm[i] + gm;
      r.ss_error += e * e;
    }
  r.df_conditions = k - 1;
  r.df_error = (n - 1) * (k - 1);
  const double tol = 1e-12 * std::max(r.ss_total, 1.0);
  if (r.ss_conditions <= tol) {
    r.f = 0.0;
    r.p = 1.0;
  } else if (r.ss_error <= tol) {
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
  } else {
    r.f = (r.ss_conditions / static_cast<double>(r.df_conditions)) / (r.ss_error / static_cast<double>(r.df_error));
    const boost::math::fisher_f dist(static_cast<double>(r.df_conditions), static_cast<double>(r.df_error));
    r.p = boost::math::cdf(boost::math::complement(dist, r.f));
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      std::vector<double> va(n), vb(n);
      for (std::size_t i = 0; i < n; ++i) {
        va[i] = x[i][a];
        vb[i] = x[i][b];
      }
      auto c = paired_comparison(va, vb);
      c.a = conditions[a];
      c.b = conditions[b];
      r.pairwise.push_back(c);
    }
  r.note = "sphericity not tested; no correction applied; pairwise paired t-tests are uncorrected";
  return r;
}

StudyReport analyze(std::span<const RatingRecord> records, const StudyConfig& config, bool include_incomplete) {
  StudyReport rep;
  std::vector<RatingRecord> used(records.begin(), records.end());
  std::set<std::string> all;
  for (const auto& r : records) all.insert(r.participant_id);
  if (!include_incomplete) used = complete_sessions(records, config.ratings_per_session());
  std::set<std::string> kept;
  for (const auto& r : used) kept.insert(r.participant_id);
  rep.participants = kept.size();
  rep.excluded_participants = all.size() - kept.size();
  rep.cells = descriptive_stats(used, config.conditions);
  if (kept.size() >= 2)
    for (Criterion c : kBlocks) rep.anova.push_back(rm_anova(used, c, config.conditions));
  return rep;
}

namespace {
std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
}  // namespace

std::string format_report(const StudyReport& report, const StudyConfig& config) {
  std::ostringstream os;
  os << "Participants: " << report.participants << " (excluded incomplete: " << report.excluded_participants
     << ")\n\n";
  os << "      ";
  char head[64];
  for (const auto& c : config.conditions) {
    std::snprintf(head, sizeof head, " %17s", c.c_str());
    os << head;
  }
  os << "\n      ";
  for (std::size_t i = 0; i < config.conditions.size(); ++i) os << "     mean      std";
  os << '\n';
  for (Criterion crit : {Criterion::coordination, Criterion::believability}) {
    os << (crit == Criterion::coordination ? "Coo.  " : "Bel.  ");
    for (const auto& cond : config.conditions)
      for (const auto& cell : report.cells)
        if (cell.criterion == crit && cell.condition == cond) {
          if (cell.empty)
            os << "    empty    empty";
          else
            os << fmt(" %8.2f", cell.mean) << fmt(" %8.2f", cell.std);
        }
    os << '\n';
  }
  for (const auto& a : report.anova) {
    os << "\nRepeated-measures ANOVA (" << to_string(a.criterion) << ", n = " << a.participants << "): F("
       << a.df_conditions << ", " << a.df_error << ") = " << fmt("%.4f", a.f) << ", p = " << fmt("%.4g", a.p)
       << '\n';
    for (const auto& p : a.pairwise)
      os << "  " << p.b << " - " << p.a << ": diff " << fmt("%.2f", p.mean_difference) << ", t(" << p.df
         << ") = " << fmt("%.3f", p.t) << ", p = " << fmt("%.4g", p.p) << " " << p.significance << '\n';
    os << "  note: " << a.note << '\n';
  }
  return os.str();
}

std::string report_json(const StudyReport& report) {
  json j;
  j["participants"] = report.participants;
  j["excluded_participants"] = report.excluded_participants;
  j["cells"] = json::array();
  for (const auto& c : report.cells) {
    json cell{{"criterion", to_string(c.criterion)}, {"condition", c.condition}, {"participants", c.participants},
              {"empty", c.empty}};
    if (!c.empty) {
      cell["mean"] = c.mean;
      cell["std"] = c.std;
    }
    j["cells"].push_back(cell);
  }
  j["anova"] = json::array();
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& a : report.anova) {
    json ja{{"criterion", to_string(a.criterion)},
            {"participants", a.participants},
            {"ss_conditions", a.ss_conditions},
            {"ss_subjects", a.ss_subjects},
            {"ss_error", a.ss_error},
            {"ss_total", a.ss_total},
            {"df_conditions", a.df_conditions},
            {"df_error", a.df_error},
            {"F", finite_or_null(a.f)},
            {"p", a.p},
            {"note", a.note}};
    ja["pairwise"] = json::array();
    for (const auto& p : a.pairwise)
      ja["pairwise"].push_back({{"a", p.a},
                                {"b", p.b},
                                {"mean_difference", p.mean_difference},
                                {"t", finite_or_null(p.t)},
                                {"df", p.df},
                                {"p", p.p},
                                {"significance", p.significance}});
    j["anova"].push_back(ja);
  }
  return j.dump(2);
}

// -------------------------------------------------------------- service

StudyService::StudyService(StudyConfig config, std::filesystem::path store_path, std::uint64_t seed)
    : config_(std::move(config)), store_(std::move(store_path)), rng_(seed) {
  config_.validate();
}

namespace {

ServiceResponse error_response(int status, const std::string& msg) {
  return {status, json{{"error", msg}}.dump()};
}

json page_json(const SessionState& s, const StudyConfig& config) {
  json j{{"participant_id", s.participant_id},
         {"page_index", s.page_index},
         {"total_pages", s.pages.size()},
         {"completed", s.completed}};
  if (s.completed) return j;
  const StudyPage& p = s.pages[s.page_index];
  j["criterion"] = to_string(p.criterion);
  j["question"] = p.criterion == Criterion::believability ? config.believability_question
                                                           : config.coordination_question;
  j["sequence_id"] = p.sequence_id;
  j["muted"] = p.muted();
  j["slider"] = {{"min", kScaleMin}, {"max", kScaleMax}, {"step", 1}};
  j["videos"] = json::array();
  for (std::size_t i = 0; i < p.condition_order.size(); ++i)
    j["videos"].push_back({{"slot", i},
                           {"condition", p.condition_order[i]},
                           {"uri", config.video_uri(p.sequence_id, p.condition_order[i], p.criterion)}});
  return j;
}

}  // namespace

std::int64_t StudyService::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::shared_ptr<StudyService::Slot> StudyService::find(const std::string& participant_id) {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(participant_id);
  return it == sessions_.end() ? nullptr : it->second;
}

ServiceResponse StudyService::create_session(const std::string& body) {
  std::string id;
  if (body.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      const json j = json::parse(body);
      if (j.contains("participant_id")) id = j.at("participant_id").get<std::string>();
    } catch (const json::exception& e) {
      return error_response(400, std::string("malformed request: ") + e.what());
    }
  }
  auto slot = std::make_shared<Slot>();
  {
    std::lock_guard lock(sessions_mutex_);
    if (id.empty()) {
      do {
        char buf[20];
        std::snprintf(buf, sizeof buf, "p%012llx", static_cast<unsigned long long>(rng_() & 0xffffffffffffull));
        id = buf;
      } while (sessions_.count(id));
    } else if (sessions_.count(id)) {
      return error_response(409, "participant " + id + " already has a session");
    }
    std::mt19937_64 session_rng(rng_());
    slot->state = facesync::create_session(config_, session_rng, id);
    sessions_[id] = slot;
  }
  return {200, page_json(slot->state, config_).dump()};
}

ServiceResponse StudyService::current_page(const std::string& participant_id) {
  auto slot = find(participant_id);
  if (!slot) return error_response(404, "unknown participant " + participant_id);
  std::lock_guard lock(slot->mutex);
  return {200, page_json(slot->state, config_).dump()};
}

ServiceResponse StudyService::submit(const std::string& participant_id, std::size_t page_index,
                                     const std::string& body) {
  auto slot = find(participant_id);
  if (!slot) return error_response(404, "unknown participant " + participant_id);
  std::vector<PageRating> ratings;
  try {
    const json j = json::parse(body);
    for (const auto& r : j.at("ratings")) {
      const auto& score = r.at("score");
      if (!score.is_number_integer()) return error_response(400, "scores must be integers");
      ratings.push_back({r.at("condition").get<std::string>(), score.get<int>()});
    }
  } catch (const json::exception& e) {
    return error_response(400, std::string("malformed ratings: ") + e.what());
  }
  std::lock_guard lock(slot->mutex);
  try {
    facesync::submit_page(slot->state, page_index, ratings, store_, now_ms());
  } catch (const StudyRejection& e) {
    const bool locked = std::string(e.what()) == "navigation locked";
    return error_response(locked ? 409 : 400, e.what());
  }
  return {200, page_json(slot->state, config_).dump()};
}

ServiceResponse StudyService::export_records() {
  std::string out;
  for (const auto& r : store_.load()) out += to_ndjson_line(r) + "\n";
  return {200, out, "application/x-ndjson"};
}

ServiceResponse StudyService::report() {
  try {
    return {200, report_json(analyze(store_.load(), config_))};
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
}

void StudyService::bind(httplib::Server& server, const std::optional<std::filesystem::path>& video_dir) {
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Post("/api/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Get(R"(/api/sessions/([^/]+)/page)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, current_page(req.matches[1]));
  });
  server.Post(R"(/api/sessions/([^/]+)/pages/(\d+))",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, submit(req.matches[1], std::stoul(req.matches[2]), req.body));
              });
  server.Get("/api/records", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, export_records());
  });
  server.Get("/api/report", [this, send](const httplib::Request&, httplib::Response& res) { send(res, report()); });
  if (video_dir && !server.set_mount_point("/videos", video_dir->string()))
    throw DataError("cannot serve videos from " + video_dir->string());
}

}  // namespace facesync
