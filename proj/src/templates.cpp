// Copyright (c) 2026 The SheetToken Authors. All Rights Reserved.
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
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "sheettoken/error.hpp"
#include "sheettoken/fabricate.hpp"

namespace sheettoken {

namespace {

constexpr std::array<const char*, 18> kCompanies = {
    "acme",   "globex", "initech", "umbrella", "stark",   "wayne",    "wonka",     "tyrell",  "cyberdyne",
    "soylent", "hooli", "vandelay", "dunder",  "oscorp",  "aperture", "gringotts", "monarch", "nakatomi"};
constexpr int kFirstYear = 2019;
constexpr int kNumYears = 6;

const std::vector<std::string> kRegions = {"North", "South", "East", "West", "Central", "Pacific"};
const std::vector<std::string> kCities = {"Berlin", "Osaka", "Toronto", "Lyon", "Austin", "Sydney", "Madrid", "Seoul"};
const std::vector<std::string> kFirstNames = {"Ana", "Ben", "Chen", "Dara", "Eli", "Fatima", "Goran", "Hana",
                                              "Ivan", "Jun", "Kofi", "Lena", "Mateo", "Nora", "Omar", "Priya",
                                              "Renée", "Sofía", "Tomás", "Zoë"};
const std::vector<std::string> kLastNames = {"Smith", "Okafor", "Müller", "Tanaka", "García", "Novak", "Rossi",
                                             "Kim", "Dubois", "Silva", "Nowak", "Larsen"};

std::string Fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string Date(int year, int month, int day) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

class Builder {
 public:
  explicit Builder(std::uint64_t seed) : rng_(seed) {}

  Rng& rng() { return rng_; }
  const std::string& Pick(const std::vector<std::string>& v) { return v[rng_.Below(v.size())]; }
  int Int(int lo, int hi) { return lo + static_cast<int>(rng_.Below(static_cast<std::uint64_t>(hi - lo + 1))); }
  double Real(double lo, double hi) { return rng_.Uniform(lo, hi); }
  std::string Person() { return Pick(kFirstNames) + " " + Pick(kLastNames); }
  std::string DateIn(int year, int first_month = 1, int last_month = 12) {
    return Date(year, Int(first_month, last_month), Int(1, 28));
  }

  // Appends `rows` data rows produced by `row(i)` under `headers`.
  CellGrid Table(std::string name, std::vector<std::string> headers, int rows,
                 const std::function<std::vector<std::string>(int)>& row) {
    CellGrid g;
    g.source_name = std::move(name);
    std::vector<Cell> head(headers.begin(), headers.end());
    g.cells.push_back(std::move(head));
    for (int i = 0; i < rows; ++i) {
      std::vector<std::string> values = row(i);
      Require(values.size() == headers.size(), ErrorCode::kInternal, "template row width mismatch");
      std::vector<Cell> cells;
      for (std::string& v : values) {
        if (v.empty()) {
          cells.emplace_back(std::nullopt);
        } else {
          cells.emplace_back(std::move(v));
        }
      }
      g.cells.push_back(std::move(cells));
    }
    return g;
  }

 private:
  Rng rng_;
};

// Enumerates (company, year, tab) slots in a seeded order so that repeated
// names are avoided until the slot space is exhausted.
class SlotDeck {
 public:
  SlotDeck(Rng& rng, std::size_t companies, std::size_t years, std::size_t tabs) {
    for (std::size_t c = 0; c < companies; ++c)
      for (std::size_t y = 0; y < years; ++y)
        for (std::size_t t = 0; t < tabs; ++t) slots_.push_back({c, y, t});
    rng.Shuffle(slots_);
  }
  std::array<std::size_t, 3> Next() { return slots_[next_++ % slots_.size()]; }

 private:
  std::vector<std::array<std::size_t, 3>> slots_;
  std::size_t next_ = 0;
};

std::string Company(std::size_t c) { return kCompanies[c]; }
int Year(std::size_t y) { return kFirstYear + static_cast<int>(y); }

void FinancialStatements(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> tabs = {"balance_sheet", "income_statement", "cash_flow"};
  static const std::vector<std::vector<std::string>> items = {
      {"Cash and equivalents", "Accounts receivable", "Inventories", "Prepaid expenses", "Property and equipment",
       "Goodwill", "Accounts payable", "Accrued liabilities", "Long-term debt", "Retained earnings",
       "Common stock", "Deferred revenue"},
      {"Revenue", "Cost of sales", "Gross profit", "Research and development", "Selling and marketing",
       "General and administrative", "Operating income", "Interest expense", "Income before taxes",
       "Income tax", "Net income", "Earnings per share"},
      {"Net income", "Depreciation", "Changes in receivables", "Changes in payables", "Operating cash flow",
       "Capital expenditures", "Acquisitions", "Investing cash flow", "Debt repayment", "Dividends paid",
       "Financing cash flow", "Net change in cash"},
  };
  SlotDeck deck(b.rng(), kCompanies.size(), kNumYears, tabs.size());
  for (std::size_t n = 0; n < count; ++n) {
    const auto [c, y, t] = deck.Next();
    const int year = Year(y);
    const double scale = b.Real(50, 5000);
    const std::string fy = "FY" + std::to_string(year);
    const std::string prior = "FY" + std::to_string(year - 1);
    out.push_back(b.Table(Company(c) + "_financials_" + std::to_string(year) + ".xlsx::" + tabs[t],
                          {"Line Item", fy + " Amount", prior + " Amount", "Change", "Change Pct", "Currency",
                           "Fiscal Year"},
                          10 + b.Int(0, 2), [&](int i) -> std::vector<std::string> {
                            const double cur = scale * b.Real(0.1, 1.0);
                            const double prev = cur * b.Real(0.8, 1.2);
                            return {items[t][static_cast<std::size_t>(i)], Fmt(cur, 2), Fmt(prev, 2),
                                    Fmt(cur - prev, 2), Fmt(100.0 * (cur - prev) / prev, 1), "USD", fy};
                          }));
  }
}

void SalesRecords(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> products = {"Widget", "Gadget", "Sprocket", "Gizmo", "Doohickey",
                                                    "Flange", "Bracket", "Valve"};
  SlotDeck deck(b.rng(), kCompanies.size(), kNumYears, 4);
  for (std::size_t n = 0; n < count; ++n) {
    const auto [c, y, q] = deck.Next();
    const int year = Year(y);
    const int first_month = static_cast<int>(q) * 3 + 1;
    out.push_back(b.Table(Company(c) + "_sales_" + std::to_string(year) + ".xlsx::Q" + std::to_string(q + 1),
                          {"Order ID", "Order Date", "Region", "Product", "Units", "Unit Price", "Revenue",
                           "Sales Rep"},
                          12 + b.Int(0, 4), [&](int i) -> std::vector<std::string> {
                            const int units = b.Int(1, 400);
                            const double price = b.Real(2, 90);
                            return {"SO-" + std::to_string(year) + "-" + std::to_string(1000 + i * 7 + b.Int(0, 6)),
                                    b.DateIn(year, first_month, first_month + 2), b.Pick(kRegions),
                                    b.Pick(products), std::to_string(units), Fmt(price, 2), Fmt(units * price, 2),
                                    b.Person()};
                          }));
  }
}

void Inventory(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> tabs = {"inbound", "outbound", "ledger", "stocktake"};
  static const std::vector<std::string> items = {"Steel bolt M8", "Copper wire 2mm", "Pallet wrap", "Hydraulic hose",
                                                 "Bearing 6204", "Gasket kit", "Circuit board", "Label roll",
                                                 "Packing foam", "Drive belt"};
  static const std::vector<std::string> suppliers = {"Northwind", "Contoso", "Fabrikam", "Tailspin", "Litware"};
  SlotDeck deck(b.rng(), kCompanies.size(), kNumYears, tabs.size());
  for (std::size_t n = 0; n < count; ++n) {
    const auto [c, y, t] = deck.Next();
    const int year = Year(y);
    out.push_back(b.Table(Company(c) + "_inventory.xlsx::" + tabs[t],
                          {"SKU", "Item", "Warehouse", "Movement Date", "Quantity", "Unit Cost", "Supplier"},
                          10 + b.Int(0, 6), [&](int) -> std::vector<std::string> {
                            return {"SKU-" + std::to_string(b.Int(10000, 99999)), b.Pick(items), b.Pick(kCities),
                                    b.DateIn(year), std::to_string(b.Int(1, 900)), Fmt(b.Real(0.5, 120), 2),
                                    b.Pick(suppliers)};
                          }));
  }
}

void HumanResources(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> tabs = {"roster", "payroll", "attendance", "training"};
  static const std::vector<std::string> depts = {"Finance", "Engineering", "Operations", "Marketing", "Legal",
                                                 "Support"};
  static const std::vector<std::string> roles = {"Analyst", "Engineer", "Manager", "Specialist", "Coordinator",
                                                 "Director"};
  SlotDeck deck(b.rng(), kCompanies.size(), 1, tabs.size());
  for (std::size_t n = 0; n < count; ++n) {
    const auto [c, y, t] = deck.Next();
    (void)y;
    out.push_back(b.Table(Company(c) + "_hr.xlsx::" + tabs[t],
                          {"Employee ID", "Full Name", "Department", "Job Role", "Hire Date", "Annual Salary",
                           "Office"},
                          10 + b.Int(0, 6), [&](int i) -> std::vector<std::string> {
                            return {"E" + std::to_string(2000 + i * 13 + b.Int(0, 12)), b.Person(), b.Pick(depts),
                                    b.Pick(roles), b.DateIn(b.Int(2008, 2024)), Fmt(b.Real(38000, 180000), 0),
                                    b.Pick(kCities)};
                          }));
  }
}

void ProjectManagement(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> tabs = {"budget", "progress", "milestones"};
  static const std::vector<std::string> phases = {"Planning", "Design", "Build", "Test", "Rollout"};
  static const std::vector<std::string> statuses = {"On track", "At risk", "Delayed", "Complete"};
  static const std::vector<std::string> projects = {"Atlas", "Beacon", "Comet", "Delta", "Ember", "Falcon",
                                                    "Granite", "Harbor", "Ion", "Juniper"};
  SlotDeck deck(b.rng(), kCompanies.size(), kNumYears, tabs.size());
  for (std::size_t n = 0; n < count; ++n) {
    const auto [c, y, t] = deck.Next();
    const int year = Year(y);
    out.push_back(b.Table(Company(c) + "_projects_" + std::to_string(year) + ".xlsx::" + tabs[t],
                          {"Project", "Owner", "Phase", "Start Date", "Budget", "Spent", "Status"},
                          8 + b.Int(0, 6), [&](int) -> std::vector<std::string> {
                            const double budget = b.Real(20000, 900000);
                            return {"Project " + b.Pick(projects), b.Person(), b.Pick(phases), b.DateIn(year),
                                    Fmt(budget, 0), Fmt(budget * b.Real(0.1, 1.1), 0), b.Pick(statuses)};
                          }));
  }
}

void StockTicks(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  SlotDeck deck(b.rng(), kCompanies.size(), kNumYears, 4);
  for (std::size_t n = 0; n < count; ++n) {
    const auto [c, y, q] = deck.Next();
    const int year = Year(y);
    const int first_month = static_cast<int>(q) * 3 + 1;
    double price = b.Real(10, 400);
    std::string ticker = Company(c).substr(0, 4);
    for (char& ch : ticker) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    out.push_back(b.Table(Company(c) + "_stock_" + std::to_string(year) + ".xlsx::q" + std::to_string(q + 1),
                          {"Trade Date", "Ticker", "Open", "High", "Low", "Close", "Volume"}, 12 + b.Int(0, 6),
                          [&](int i) -> std::vector<std::string> {
                            const double open = price;
                            price *= 1.0 + b.Real(-0.04, 0.04);
                            const double hi = std::max(open, price) * b.Real(1.0, 1.02);
                            const double lo = std::min(open, price) * b.Real(0.98, 1.0);
                            return {Date(year, first_month + i / 10, 1 + (i * 3) % 28), ticker, Fmt(open, 2),
                                    Fmt(hi, 2), Fmt(lo, 2), Fmt(price, 2), std::to_string(b.Int(10000, 2000000))};
                          }));
  }
}

void FinancialBusiness(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> tabs = {"kpis", "segments", "forecast"};
  static const std::vector<std::string> metrics = {"Gross margin", "EBITDA", "Customer count", "Churn rate",
                                                   "Average order value", "Headcount", "Backlog", "Free cash flow"};
  SlotDeck deck(b.rng(), kCompanies.size(), kNumYears, tabs.size());
  for (std::size_t n = 0; n < count; ++n) {
    const auto [c, y, t] = deck.Next();
    const int year = Year(y);
    out.push_back(b.Table(Company(c) + "_business_" + std::to_string(year) + ".xlsx::" + tabs[t],
                          {"Metric", "Reporting Period", "Actual", "Target", "Variance", "Unit"}, 8 + b.Int(0, 4),
                          [&](int i) -> std::vector<std::string> {
                            const double target = b.Real(10, 1000);
                            const double actual = target * b.Real(0.8, 1.2);
                            return {metrics[static_cast<std::size_t>(i) % metrics.size()],
                                    "FY" + std::to_string(year) + " M" + std::to_string(1 + i % 12), Fmt(actual, 1),
                                    Fmt(target, 1), Fmt(actual - target, 1), i % 2 ? "USD m" : "count"};
                          }));
  }
}

void GlobalIndices(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::pair<std::string, std::string>> markets = {
      {"us", "S&P 500"}, {"uk", "FTSE 100"}, {"japan", "Nikkei 225"},
      {"germany", "DAX"}, {"france", "CAC 40"}, {"china", "CSI 300"}};
  for (std::size_t n = 0; n < count; ++n) {
    const auto& [market, index] = markets[n % markets.size()];
    const int year = kFirstYear + b.Int(0, kNumYears - 1);
    double level = b.Real(2000, 30000);
    const std::string suffix = n < markets.size() ? "" : "_" + std::to_string(n / markets.size() + 1);
    out.push_back(b.Table("indices_" + market + suffix + ".xlsx::daily",
                          {"Date", "Index", "Open", "Close", "Change", "Volume"}, 12 + b.Int(0, 6),
                          [&](int i) -> std::vector<std::string> {
                            const double open = level;
                            level *= 1.0 + b.Real(-0.02, 0.02);
                            return {Date(year, 1 + i / 20, 1 + i % 28), index, Fmt(open, 2), Fmt(level, 2),
                                    Fmt(level - open, 2), std::to_string(b.Int(100000, 9000000))};
                          }));
  }
}

std::string LongText(Builder& b, const std::vector<std::string>& words, std::size_t min_chars) {
  std::string s;
  while (s.size() < min_chars) {
    if (!s.empty()) s += ' ';
    s += b.Pick(words);
  }
  return s + ".";
}

void MovieReviews(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> tabs = {"critics", "audience", "festival"};
  static const std::vector<std::string> words = {"the", "pacing", "felt", "uneven", "but", "performances", "were",
                                                 "luminous", "and", "score", "lingered", "long", "after", "credits",
                                                 "a", "bold", "script", "undercut", "by", "clumsy", "editing"};
  static const std::vector<std::string> adjectives = {"Silent", "Crimson", "Last", "Hidden", "Electric", "Northern",
                                                      "Broken", "Golden"};
  static const std::vector<std::string> nouns = {"Harbor", "Garden", "Signal", "Orchard", "Voyage", "Empire",
                                                 "Lantern", "Frontier"};
  for (std::size_t n = 0; n < count; ++n) {
    const std::string tab = tabs[n % tabs.size()];
    out.push_back(b.Table("movie_reviews.xlsx::" + tab + (n < tabs.size() ? "" : std::to_string(n)),
                          {"Movie Title", "Reviewer", "Rating", "Review Text", "Review Date"}, 24,
                          [&](int i) -> std::vector<std::string> {
                            return {b.Pick(adjectives) + " " + b.Pick(nouns) + " " + std::to_string(i + 1),
                                    b.Person(), std::to_string(b.Int(1, 10)), LongText(b, words, 140),
                                    b.DateIn(kFirstYear + b.Int(0, kNumYears - 1))};
                          }));
  }
}

void TextSentiment(Builder& b, std::size_t count, std::vector<CellGrid>& out) {
  static const std::vector<std::string> words = {"service", "was", "slow", "friendly", "staff", "and", "the",
                                                 "product", "arrived", "broken", "delighted", "with", "quality",
                                                 "would", "not", "recommend", "again", "excellent", "value"};
  static const std::vector<std::string> labels = {"positive", "negative", "neutral"};
  static const std::vector<std::string> channels = {"email", "survey", "chat", "review site"};
  for (std::size_t n = 0; n < count; ++n) {
    out.push_back(b.Table("sentiment_corpus" + (n ? std::to_string(n + 1) : std::string()) + ".xlsx::labeled",
                          {"Text", "Label", "Score", "Channel", "Length"}, 16,
                          [&](int) -> std::vector<std::string> {
                            std::string text = LongText(b, words, b.Int(0, 1) == 1 ? 130 : 60);
                            return {text, b.Pick(labels), Fmt(b.Real(-1, 1), 3), b.Pick(channels),
                                    std::to_string(text.size())};
                          }));
  }
}

}  // namespace

std::size_t TemplateCounts::total() const {
  return financial_statements + sales_records + inventory + human_resources + project_management + stock_ticks +
         financial_business + global_indices + movie_reviews + text_sentiment;
}

std::vector<CellGrid> GenerateTemplates(const TemplateCounts& counts, std::uint64_t seed) {
  Require(counts.total() > 0, ErrorCode::kInvalidArgument, "template counts are all zero");
  std::vector<CellGrid> out;
  out.reserve(counts.total());
  // Each category draws from its own stream so changing one count leaves the
  // others untouched.
  const std::array<std::pair<std::size_t, void (*)(Builder&, std::size_t, std::vector<CellGrid>&)>, 10> cats = {{
      {counts.financial_statements, FinancialStatements},
      {counts.sales_records, SalesRecords},
      {counts.inventory, Inventory},
      {counts.human_resources, HumanResources},
      {counts.project_management, ProjectManagement},
      {counts.stock_ticks, StockTicks},
      {counts.financial_business, FinancialBusiness},
      {counts.global_indices, GlobalIndices},
      {counts.movie_reviews, MovieReviews},
      {counts.text_sentiment, TextSentiment},
  }};
  for (std::size_t k = 0; k < cats.size(); ++k) {
    Builder b(DeriveSeed(seed, 1000 + k));
    cats[k].second(b, cats[k].first, out);
  }
  return out;
}

}  // namespace sheettoken
