#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/infoguide/index.hpp"
#include "smartpilot/infoguide/keywords.hpp"
#include "smartpilot/kernel/rng.hpp"

namespace smartpilot::datagen {

struct CorpusConfig {
  std::uint64_t seed = 42;
  std::size_t n_questions = 20;
  std::size_t n_ood_questions = 10;
  std::size_t paragraphs_per_page = 4;

  void validate() const {
    if (n_questions == 0 || n_questions > 36) throw ConfigError("corpus: n_questions must lie in [1, 36]");
    if (n_ood_questions > 15) throw ConfigError("corpus: at most 15 out-of-domain questions");
    if (paragraphs_per_page == 0) throw ConfigError("corpus: paragraphs_per_page must be positive");
  }
};

struct GoldQuestion {
  std::string question;
  std::string chunk_id;
  friend bool operator==(const GoldQuestion&, const GoldQuestion&) = default;
};

struct Corpus {
  std::vector<infoguide::ManualText> manuals;
  infoguide::KeywordSet keywords;
  std::vector<GoldQuestion> questions;
  std::vector<std::string> ood_questions;
  // Chunks written around a keyword topic; the rest are front matter.
  std::set<std::string> relevant_chunk_ids;
};

namespace detail {

struct Topic {
  const char* part;
  const char* action;
  const char* detail;
};

struct ManualSpec {
  const char* name;
  const char* header;
  const char* footer;
  const char* title;
  std::array<Topic, 9> topics;
  std::array<const char*, 2> front_matter;
};

inline const std::array<ManualSpec, 4>& manual_specs() {
  static const std::array<ManualSpec, 4> specs{{
      {"robot_arm",
       "RA-200 Articulated Robot Handbook",
       "Northfield Automation Systems",
       "# RA-200 Articulated Robot",
       {{{"gripper jaw", "calibrate", "with the zero offset gauge until both fingers close evenly"},
         {"wrist joint", "lubricate", "with lithium grease through the grease nipple"},
         {"base servo", "replace", "after unplugging the motor encoder cable"},
         {"teach pendant", "mount", "on the rail bracket beside the cell door"},
         {"emergency stop", "test", "by pressing the red mushroom button twice"},
         {"end effector", "align", "against the fixture dowel pins"},
         {"cable harness", "route", "through the elbow clamp without twisting"},
         {"vacuum cup", "clean", "with isopropyl wipes and let it dry"},
         {"collision sensor", "reset", "from the controller diagnostics menu"}}},
       {"This handbook covers the RA-200 family built since 2019, including the long reach variant, the ceiling bracket kit and the compact six axis model sold to laboratories.",
        "Revision history, translations and printed copies are published by Northfield on request through the customer portal, where earlier editions remain archived for reference."}},
      {"conveyor",
       "CB-40 Belt Conveyor Handbook",
       "Northfield Material Handling",
       "# CB-40 Belt Conveyor",
       {{{"drive belt", "tension", "until the midpoint deflection reaches eight millimetres"},
         {"roller bearing", "grease", "with two pumps of bearing grease"},
         {"speed encoder", "zero", "while the belt is stopped and empty"},
         {"pallet stopper", "adjust", "so the pallet halts flush with the stand"},
         {"guard panel", "fasten", "with all four quarter turn latches"},
         {"motor gearbox", "drain", "into a tray after warming the oil"},
         {"photo eye", "aim", "at the reflector on the opposite rail"},
         {"belt splice", "examine", "for lifted edges and frayed lacing"},
         {"side rail", "level", "using a spirit level along its length"}}},
       {"The CB-40 modules ship in two metre and four metre lengths with matching legs, corner transfers, merge sections and an optional incline kit for mezzanine lines.",
        "Colour options, custom lengths and export crating are quoted by the regional sales office, which also arranges freight, customs paperwork and delivery scheduling."}},
      {"sensors",
       "Line Sensor Kit Handbook",
       "Northfield Instrumentation",
       "# Line Sensor Kit",
       {{{"pressure transducer", "tare", "with the supply line vented to atmosphere"},
         {"thermocouple probe", "swap", "after letting the heater block cool down"},
         {"proximity switch", "set", "to a sensing gap of two millimetres"},
         {"load cell", "calibrate", "with the certified five kilogram weight"},
         {"vision camera", "focus", "on the printed target card"},
         {"flow meter", "flush", "with clean water for thirty seconds"},
         {"humidity probe", "verify", "against the reference hygrometer"},
         {"signal amplifier", "ground", "to the cabinet star point"},
         {"laser scanner", "wipe", "using a lint free lens tissue"}}},
       {"The sensor kit bundles transmitters, shielded cabling, junction boxes, mounting brackets of several sizes and a configuration tablet preloaded with the vendor software.",
        "Firmware images for every transmitter are listed in the download portal together with release summaries, checksums, archived builds and the matching configuration templates."}},
      {"assembly_stand",
       "AS-7 Assembly Stand Handbook",
       "Northfield Fixtures",
       "# AS-7 Assembly Stand",
       {{{"clamp fixture", "torque", "to twelve newton metres in a cross pattern"},
         {"nose cradle", "position", "so the cone tip meets the alignment notch"},
         {"body holder", "secure", "with the spring plunger fully engaged"},
         {"pneumatic valve", "bleed", "by opening the exhaust screw slowly"},
         {"work platform", "anchor", "with expansion bolts into the floor"},
         {"tool tray", "attach", "to the left upright with thumb screws"},
         {"hydraulic lift", "raise", "only after the pallet is centred"},
         {"rivet gun", "store", "in the foam drawer with its nozzle capped"},
         {"locating pin", "press", "into the plate with the arbor tool"}}},
       {"The AS-7 stand holds rocket kits of up to three body sections, with interchangeable saddles for narrow and wide tubes and an accessory rail for small jigs.",
        "Stand frames are welded from square steel tube and powder coated in grey unless another colour is ordered, while feet and caster plates come zinc plated."}},
  }};
  return specs;
}

inline const std::array<const char*, 10>& filler_sentences() {
  static const std::array<const char*, 10> s{
      "Spare parts are listed in the appendix with their order numbers.",
      "Contact the line supervisor if anything is unclear.",
      "Keep this handbook near the cell.",
      "Record the date and your initials in the logbook.",
      "Tools for this task are stored in the blue cabinet.",
      "Expect the task to take about ten minutes.",
      "Photos of each step are available from the engineering team.",
      "Work in pairs where the parts are heavy.",
      "Return all tools to the shadow board afterwards.",
      "Report missing parts to stores before starting."};
  return s;
}

inline const std::array<const char*, 15>& ood_bank() {
  static const std::array<const char*, 15> q{
      "Who won the football championship final?",
      "What is a good recipe for chocolate cake?",
      "How far away is the moon?",
      "Which novel did Tolstoy write first?",
      "What is the capital city of Australia?",
      "How do I knit a wool scarf?",
      "Why do cats purr?",
      "Recommend a jazz album from the sixties.",
      "When did the Roman empire fall?",
      "How many calories are in a banana?",
      "Which planet has the biggest rings?",
      "How tall was the tallest giraffe?",
      "Name a famous opera by Verdi.",
      "What language do people speak in Brazil?",
      "How should I water orchids?"};
  return q;
}

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace detail

/// Four manuals (robot arm, conveyor, sensors, assembly stand), each with two
/// front-matter paragraphs and nine keyword topics spread over pages with a
/// running header, footer, page numbers and decoration lines. Each topic
/// paragraph names its part and action in a keyword sentence; gold questions
/// ask for that action on that part.
inline Corpus gen_corpus(const CorpusConfig& cfg = {}) {
  cfg.validate();
  Corpus out;
  out.keywords = infoguide::default_keywords();
  const auto& seeds = out.keywords.seeds;
  kernel::CounterRng rng(cfg.seed, "corpus");

  struct Placed {
    std::string chunk_id;
    std::string part, action;
  };
  std::vector<Placed> topics;

  for (const auto& spec : detail::manual_specs()) {
    std::vector<std::string> paragraphs;
    std::vector<bool> relevant;
    for (const char* fm : spec.front_matter) {
      paragraphs.emplace_back(fm);
      relevant.push_back(false);
    }
    std::vector<std::size_t> order(spec.topics.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    kernel::shuffle(order, rng);
    for (auto ti : order) {
      const auto& t = spec.topics[ti];
      const std::string seed = seeds[rng.below(seeds.size())];
      const std::string part = t.part, action = t.action;
      std::vector<std::string> sentences;
      sentences.push_back(detail::capitalize(seed) + " step: " + action + " the " + part + " " + t.detail + ".");
      sentences.push_back(detail::capitalize(seed) + " notes for the " + part + " are kept with the other " + seed +
                          " records.");
      const auto& fill = detail::filler_sentences();
      const std::size_t a = rng.below(fill.size());
      const std::size_t b = (a + 1 + rng.below(fill.size() - 1)) % fill.size();
      const std::size_t where = rng.below(3);
      sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(where), fill[a]);
      sentences.push_back(fill[b]);
      std::string p;
      for (const auto& s : sentences) p += (p.empty() ? "" : " ") + s;
      topics.push_back({infoguide::chunk_id(spec.name, paragraphs.size()), part, action});
      out.relevant_chunk_ids.insert(topics.back().chunk_id);
      paragraphs.push_back(std::move(p));
      relevant.push_back(true);
    }

    // Layout: title, pages of paragraphs wrapped at ~72 columns, header and
    // footer on every page, page number lines, a rule under the header.
    std::string doc = std::string(spec.title) + "\n\n";
    const std::size_t per_page = cfg.paragraphs_per_page;
    const std::size_t pages = (paragraphs.size() + per_page - 1) / per_page;
    for (std::size_t pg = 0; pg < pages; ++pg) {
      if (pg > 0) doc += "\f";
      doc += std::string(spec.header) + "\n==============================\n\n";
      for (std::size_t i = pg * per_page; i < std::min(paragraphs.size(), (pg + 1) * per_page); ++i) {
        std::size_t col = 0;
        for (std::size_t c = 0, start = 0; c <= paragraphs[i].size(); ++c) {
          if (c == paragraphs[i].size() || paragraphs[i][c] == ' ') {
            const auto word = paragraphs[i].substr(start, c - start);
            if (col > 0 && col + 1 + word.size() > 72) {
              doc += "\n";
              col = 0;
            } else if (col > 0) {
              doc += " ";
              ++col;
            }
            doc += word;
            col += word.size();
            start = c + 1;
          }
        }
        doc += "\n\n";
      }
      doc += std::string(spec.footer) + "\n" + "Page " + std::to_string(pg + 1) + "\n";
    }
    out.manuals.push_back({spec.name, std::move(doc)});
  }

  // Gold questions: a seeded choice of distinct topics.
  std::vector<std::size_t> pick(topics.size());
  for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
  kernel::CounterRng qrng(cfg.seed, "corpus/questions");
  kernel::shuffle(pick, qrng);
  static const std::array<const char*, 3> forms{"How do I {a} the {p}?", "Explain how to {a} the {p}.",
                                                "What is the right way to {a} the {p}?"};
  for (std::size_t i = 0; i < cfg.n_questions; ++i) {
    const auto& t = topics[pick[i]];
    std::string q = forms[qrng.below(forms.size())];
    q.replace(q.find("{a}"), 3, t.action);
    q.replace(q.find("{p}"), 3, t.part);
    out.questions.push_back({q, t.chunk_id});
  }

  std::set<std::string> vocab;
  for (const auto& m : out.manuals)
    for (auto& t : infoguide::content_tokens(m.text)) vocab.insert(std::move(t));
  for (const char* q : detail::ood_bank()) {
    if (out.ood_questions.size() == cfg.n_ood_questions) break;
    bool disjoint = true;
    for (const auto& t : infoguide::content_tokens(q)) disjoint = disjoint && !vocab.count(t);
    if (disjoint) out.ood_questions.emplace_back(q);
  }
  if (out.ood_questions.size() < cfg.n_ood_questions)
    throw ConfigError("corpus: not enough vocabulary-disjoint out-of-domain questions");
  return out;
}

/// manuals/<name>.txt, keywords.json, questions.json.
inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "manuals");
  for (const auto& m : c.manuals) {
    std::ofstream out(dir / "manuals" / (m.name + ".txt"), std::ios::binary);
    out << m.text;
  }
  std::ofstream(dir / "keywords.json") << infoguide::to_json(c.keywords).dump(2) << "\n";
  nlohmann::json gold = nlohmann::json::array();
  for (const auto& q : c.questions) gold.push_back({{"question", q.question}, {"chunk_id", q.chunk_id}});
  nlohmann::json j{{"questions", gold},
                   {"out_of_domain", c.ood_questions},
                   {"relevant_chunk_ids", c.relevant_chunk_ids}};
  std::ofstream(dir / "questions.json") << j.dump(2) << "\n";
}

}  // namespace smartpilot::datagen
