#pragma once

// Published reference values the estimator is calibrated against. Versioned
// so that manifests can record which constants produced an output.

#include <array>
#include <cstdint>
#include <string_view>

namespace partacc::reference {

inline constexpr std::string_view model_version = "table3-2021.1";

struct Table1Row {
  std::int64_t d, N, L;
  double real_accuracy;
  double estimated_accuracy;
};

// d = 2, N = L; the theoretical estimate is constant.
inline constexpr std::array<Table1Row, 7> table1{{
    {2, 100, 100, 0.844, 0.769},
    {2, 200, 200, 0.741, 0.769},
    {2, 500, 500, 0.686, 0.769},
    {2, 800, 800, 0.664, 0.769},
    {2, 1000, 1000, 0.645, 0.769},
    {2, 2000, 2000, 0.592, 0.769},
    {2, 5000, 5000, 0.556, 0.769},
}};

struct Table2Row {
  std::int64_t N, L;
  double real_accuracy;
  double estimated_accuracy;
  double difference;
};

// d = 2, estimates from the fitted d = 2 power law.
inline constexpr std::array<Table2Row, 12> table2{{
    {115, 2483, 0.910, 0.846, 0.064},
    {154, 1595, 0.805, 0.819, 0.014},
    {243, 519, 0.782, 0.767, 0.015},
    {508, 4992, 0.699, 0.724, 0.025},
    {689, 2206, 0.665, 0.685, 0.020},
    {1366, 4133, 0.614, 0.631, 0.016},
    {2139, 2384, 0.578, 0.593, 0.015},
    {2661, 890, 0.566, 0.573, 0.007},
    {1462, 94, 0.577, 0.592, 0.014},
    {3681, 1300, 0.555, 0.560, 0.004},
    {4416, 4984, 0.556, 0.559, 0.003},
    {4498, 1359, 0.550, 0.552, 0.002},
}};

struct Table3Row {
  int d;
  double x, y, c, r_squared;
};

inline constexpr std::array<Table3Row, 9> table3{{
    {2, 0.0744, 0.6017, 8.4531, 0.998},
    {3, 0.1269, 0.6352, 15.5690, 0.965},
    {4, 0.2802, 0.7811, 47.3261, 0.961},
    {5, 0.5326, 0.8515, 28.4495, 0.996},
    {6, 0.4130, 0.8686, 61.0874, 0.996},
    {7, 0.4348, 0.8239, 33.4448, 0.977},
    {8, 0.5278, 0.9228, 61.3121, 0.996},
    {9, 0.7250, 1.0310, 82.5083, 0.995},
    {10, 0.6633, 1.0160, 91.4913, 0.995},
}};

struct LinearLawRow {
  double slope, intercept, r_squared;
};

inline constexpr LinearLawRow x_law{0.0758, -0.0349, 0.858};
inline constexpr LinearLawRow y_law{0.0517, 0.5268, 0.902};
inline constexpr LinearLawRow c_law{9.4323, -8.8558, 0.804};

// Worked example: d = 3, N = L = 200.
inline constexpr double worked_example_b = 33.33;
inline constexpr double worked_example_accuracy = 0.995;

// Complete-separation limit for S = 10 N^2.
inline constexpr double limit_b10 = 0.9512;

}  // namespace partacc::reference
