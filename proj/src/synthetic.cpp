#include "ffep/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace ffep {

void write_haberman_like(std::ostream& out, std::size_t n_examples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> age_dist(52.5, 10.8);
  std::uniform_int_distribution<int> year_dist(58, 69);
  std::normal_distribution<double> log_nodes(0.6, 1.3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k < n_examples; ++k) {
    const int age = std::clamp(static_cast<int>(std::lround(age_dist(rng))), 30, 83);
    const int year = year_dist(rng);
    const int nodes = std::clamp(static_cast<int>(std::floor(std::exp(log_nodes(rng)))) - 1, 0, 52);
    const double logit = -1.55 + 0.085 * nodes + 0.02 * (age - 52) - 0.03 * (year - 63);
    const double p_died = 1.0 / (1.0 + std::exp(-logit));
    const int status = unif(rng) < p_died ? 2 : 1;
    out << age << ',' << year << ',' << nodes << ',' << status << '\n';
  }
}

ColumnSchema haberman_schema() {
  ColumnSchema schema;
  schema.has_header = false;
  schema.label_column = "3";
  schema.label_map = {{"1", 1}, {"2", -1}};
  schema.numeric_columns = {"0", "1", "2"};
  return schema;
}

}  // namespace ffep
