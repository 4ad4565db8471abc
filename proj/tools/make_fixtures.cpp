// Writes the synthetic fixture set: GDELT-style events, a url,headline
// store, daily closes and a run config. Next-day returns load on the
// day's latent news mood, so the pipeline has a signal to find.
//
//   make_fixtures <dir> [trading_days=300] [seed=7]
#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "macrosent/core.hpp"
#include "macrosent/csv.hpp"

namespace {

constexpr std::array kPositive{"rally", "gains", "surge", "rebound", "growth", "upbeat", "optimism", "recovery", "deal", "agreement", "stability", "confidence"};
constexpr std::array kNegative{"slump", "falls", "plunge", "recession", "crisis", "fears", "selloff", "downgrade", "tensions", "sanctions", "dispute", "slowdown"};
constexpr std::array kNeutral{"euro", "dollar", "central", "bank", "talks", "minister", "markets", "europe", "ahead", "week", "officials", "report", "trade", "policy"};
constexpr std::array kActors{"GERMANY", "FRANCE", "UNITED STATES", "CHINA", "ITALY", "SPAIN", "EUROPEAN UNION", "UNITED KINGDOM"};

}  // namespace

int main(int argc, char** argv) {
    using namespace macrosent;
    if (argc < 2) {
        std::cerr << "usage: make_fixtures <dir> [trading_days] [seed]\n";
        return 1;
    }
    const std::filesystem::path dir = argv[1];
    const int trading_days = argc > 2 ? std::stoi(argv[2]) : 300;
    const unsigned long seed = argc > 3 ? std::stoul(argv[3]) : 7;
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::ofstream events(dir / "events.csv"), store(dir / "headlines.csv"), prices(dir / "prices.csv");
    csv::write_row(events, {"SQLDATE", "Actor1Name", "Actor2Name", "EventBaseCode", "GoldsteinScale", "NumArticles", "SOURCEURL"});
    csv::write_row(store, {"url", "headline"});
    csv::write_row(prices, {"date", "close"});

    Date day(2020, 1, 1);
    double close = 1.1000;
    double mood = 0.0;
    int written = 0, serial = 0;
    prices << day.iso() << "," << format_fixed(close, 6) << "\n";
    while (written < trading_days) {
        // AR(1) mood so weekends carry information into Monday
        mood = 0.3 * mood + normal(rng);
        const int n_events = 12 + static_cast<int>(unif(rng) * 10);
        for (int e = 0; e < n_events; ++e) {
            const int code = unif(rng) < 0.8 ? 100 + static_cast<int>(unif(rng) * 100) : 10 + static_cast<int>(unif(rng) * 80);
            const double p_pos = 1.0 / (1.0 + std::exp(-1.5 * mood));
            std::string headline;
            const int words = 6 + static_cast<int>(unif(rng) * 5);
            for (int w = 0; w < words; ++w) {
                const double u = unif(rng);
                const char* token = u < 0.35 ? (unif(rng) < p_pos ? kPositive[static_cast<std::size_t>(unif(rng) * kPositive.size())]
                                                                  : kNegative[static_cast<std::size_t>(unif(rng) * kNegative.size())])
                                             : kNeutral[static_cast<std::size_t>(unif(rng) * kNeutral.size())];
                if (w) headline += ' ';
                headline += token;
            }
            headline[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(headline[0])));
            const std::string url = "https://news.example.com/" + day.iso() + "/story-" + std::to_string(++serial);
            const double goldstein = std::round(std::clamp(2.0 * mood + 3.0 * normal(rng), -10.0, 10.0) * 10.0) / 10.0;
            const int articles = 1 + static_cast<int>(unif(rng) * 40);
            std::string date8 = day.iso();
            std::erase(date8, '-');
            csv::write_row(events, {date8, kActors[static_cast<std::size_t>(unif(rng) * kActors.size())],
                                    kActors[static_cast<std::size_t>(unif(rng) * kActors.size())], std::to_string(code),
                                    format_double(goldstein), std::to_string(articles), url});
            // a few stories never resolve to text
            if (unif(rng) < 0.95) csv::write_row(store, {url, headline});
        }
        day = day.next();
        if (day.weekday() >= 1 && day.weekday() <= 5) {
            // the return into the next bar loads on news published since the last bar
            close *= std::exp(0.002 * mood + 0.004 * normal(rng));
            prices << day.iso() << "," << format_fixed(close, 6) << "\n";
            ++written;
        }
    }

    std::ofstream cfg(dir / "fixture.cfg");
    cfg << "# synthetic fixture run; paths are relative to the repository root\n"
        << "events = data/fixtures/events.csv\n"
        << "headline_store = data/fixtures/headlines.csv\n"
        << "prices = data/fixtures/prices.csv\n"
        << "lexicon = data/lexicon_v1.txt\n"
        << "asset = EURUSD\n"
        << "out = out\n"
        << "cost_rate = 0.0002\n"
        << "k_splits = 5\n"
        << "model = both\n"
        << "top_k = 12\n"
        << "bootstrap_n = 200\n"
        << "seed = 20250101\n";
    std::cout << "wrote " << written << " trading days and " << serial << " events to " << dir.string() << "\n";
    return 0;
}
