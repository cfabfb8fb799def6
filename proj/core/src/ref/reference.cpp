#include "ftlab/ref/reference.hpp"

#include <algorithm>

namespace ftlab::ref {

const char* const kFunctionTokenTableCite =
    "Appendix D, complete function-token list (SlimPajama-627B rank order)";
const char* const kCoverageTableCite =
    "Table 1, cumulative feature coverage by top-10 frequent tokens";
const char* const kFeatureCountCite = "Section 3.1, bipartite graph construction";
const char* const kGroupLossCite = "Section 4.3, loss by transition group at 1.5B vs 8B";
const char* const kLambdaPresetCite = "Appendix C, sparsity coefficient per checkpoint";

const std::vector<TokenStatRow>& function_token_table() {
    static const std::vector<TokenStatRow> rows = {
        {",", 95.00, 3.60, 3.60},
        {"_the", 90.92, 3.19, 6.79},
        {".", 95.80, 2.31, 9.10},
        {"_and", 89.69, 1.81, 10.91},
        {"_of", 87.59, 1.80, 12.71},
        {"_to", 88.71, 1.68, 14.40},
        {"__", 81.35, 1.59, 15.99},
        {"_a", 87.62, 1.33, 17.32},
        {"_in", 86.04, 1.16, 18.48},
        {".\\n", 84.58, 0.91, 19.39},
        {"_is", 78.90, 0.74, 20.13},
        {"\\n", 42.30, 0.70, 20.84},
        {"_for", 79.82, 0.64, 21.48},
        {"_that", 67.02, 0.62, 22.09},
        {"'s", 63.02, 0.49, 22.58},
        {"_on", 72.40, 0.47, 23.05},
        {"_with", 73.68, 0.47, 23.52},
        {"_(", 55.05, 0.47, 23.99},
        {":", 52.73, 0.42, 24.41},
        {"_it", 57.50, 0.38, 24.79},
        {"_I", 37.43, 0.38, 25.17},
        {"_as", 61.49, 0.37, 25.54},
        {"_you", 47.06, 0.35, 25.90},
        {"_be", 60.03, 0.33, 26.23},
        {"_are", 60.45, 0.33, 26.56},
        {"_was", 45.51, 0.33, 26.89},
        {"1", 40.84, 0.30, 27.18},
        {"_at", 59.38, 0.29, 27.48},
        {"_by", 58.44, 0.29, 27.77},
        {"_``", 43.01, 0.28, 28.05},
        {"_The", 55.12, 0.28, 28.34},
        {"_from", 61.23, 0.28, 28.62},
        {")", 44.33, 0.28, 28.90},
        {"_this", 56.27, 0.26, 29.16},
        {"_have", 55.12, 0.26, 29.41},
        {"_or", 50.42, 0.25, 29.66},
        {"2", 39.09, 0.25, 29.91},
        {"-", 38.67, 0.24, 30.15},
        {"_an", 56.55, 0.23, 30.38},
        {"0", 31.70, 0.22, 30.60},
        {"_not", 46.51, 0.21, 30.81},
        {"_will", 46.71, 0.19, 31.00},
        {"_can", 47.99, 0.19, 31.19},
        {"_has", 49.09, 0.19, 31.38},
        {"201", 33.71, 0.18, 31.56},
        {"_we", 35.13, 0.18, 31.74},
        {"\\\\", 1.30, 0.17, 31.91},
        {"The", 48.49, 0.17, 32.08},
        {"_your", 34.99, 0.17, 32.25},
        {"3", 35.29, 0.17, 32.41},
        {"_but", 41.84, 0.16, 32.57},
        {"_his", 25.09, 0.16, 32.73},
        {"``", 34.19, 0.16, 32.88},
        {"_all", 45.24, 0.15, 33.04},
        {"_their", 39.27, 0.15, 33.19},
        {"_he", 23.69, 0.15, 33.34},
        {"{", 1.18, 0.15, 33.49},
        {"_they", 35.37, 0.15, 33.64},
        {"'t", 33.12, 0.15, 33.78},
        {"_more", 42.84, 0.14, 33.93},
        {"_one", 41.94, 0.14, 34.07},
        {"_which", 40.67, 0.14, 34.21},
        {"4", 31.49, 0.13, 34.34},
        {"5", 32.71, 0.13, 34.47},
        {"_$", 12.48, 0.13, 34.61},
        {"_\\", 0.90, 0.13, 34.73},
        {"_about", 37.54, 0.13, 34.86},
        {"___", 5.40, 0.11, 34.97},
        {";", 21.62, 0.11, 35.09},
        {"_who", 33.50, 0.11, 35.20},
        {"_also", 40.22, 0.11, 35.31},
        {"_our", 30.62, 0.11, 35.42},
        {"_were", 27.00, 0.11, 35.53},
        {"_out", 36.49, 0.11, 35.64},
        {"/", 20.32, 0.11, 35.75},
        {"6", 28.01, 0.11, 35.86},
        {"_up", 36.43, 0.11, 35.97},
        {"8", 28.60, 0.11, 36.08},
        {"_been", 35.32, 0.11, 36.18},
        {"_had", 25.51, 0.11, 36.29},
        {"_if", 30.49, 0.10, 36.39},
        {"7", 27.31, 0.10, 36.50},
        {"_so", 33.25, 0.10, 36.60},
        {"_my", 20.96, 0.10, 36.70},
        {"_=", 6.62, 0.10, 36.80},
        {"_time", 34.79, 0.10, 36.90},
        {"_her", 15.21, 0.10, 37.00},
        {"9", 26.28, 0.10, 37.10},
        {"_-", 19.91, 0.10, 37.20},
        {"'", 27.13, 0.10, 37.30},
        {"s", 28.83, 0.09, 37.39},
        {"_would", 27.35, 0.09, 37.49},
        {"_new", 32.43, 0.09, 37.58},
        {"_when", 32.82, 0.09, 37.67},
        {"_other", 33.77, 0.09, 37.76},
        {"_there", 30.15, 0.09, 37.86},
        {"_A", 28.29, 0.09, 37.95},
        {"_its", 29.64, 0.09, 38.04},
        {"_It", 31.56, 0.09, 38.13},
        {"_like", 30.40, 0.09, 38.22},
        {"_do", 29.89, 0.09, 38.31},
        {"_what", 28.23, 0.09, 38.39},
        {"____", 3.87, 0.09, 38.48},
        {"_'", 18.94, 0.09, 38.57},
        {"_into", 31.66, 0.09, 38.65},
        {"200", 19.03, 0.08, 38.74},
        {"}", 2.01, 0.08, 38.82},
        {"_than", 30.00, 0.08, 38.90},
        {"_said", 19.12, 0.08, 38.98},
        {"_some", 29.97, 0.08, 39.06},
        {"_them", 27.36, 0.08, 39.14},
        {"_In", 28.39, 0.08, 39.22},
        {"_&", 17.66, 0.08, 39.30},
        {"_--", 18.50, 0.08, 39.38},
        {"_people", 24.05, 0.08, 39.46},
        {"ing", 29.18, 0.08, 39.53},
        {"_first", 29.94, 0.08, 39.61},
        {")\\n", 13.24, 0.08, 39.69},
        {"I", 23.86, 0.08, 39.76},
        {"?", 24.01, 0.08, 39.84},
        {"A", 27.74, 0.08, 39.92},
        {"_just", 27.64, 0.07, 39.99},
    };
    return rows;
}

const TokenStatRow* function_token_row(std::string_view surface) {
    const auto& rows = function_token_table();
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const TokenStatRow& r) { return surface == r.surface; });
    return it == rows.end() ? nullptr : &*it;
}

const std::vector<CoverageCell>& coverage_table() {
    static const std::vector<CoverageCell> rows = {
        {1, ".", 23.19, 51.32, 37.21},
        {2, ",", 32.01, 62.45, 49.78},
        {3, "the", 36.88, 66.93, 55.15},
        {4, "\\n", 39.68, 71.30, 59.86},
        {5, "and", 41.21, 71.97, 61.48},
        {6, "to", 43.16, 73.07, 63.30},
        {7, "of", 46.00, 74.43, 65.16},
        {8, " ", 47.44, 75.70, 67.08},
        {9, "a", 47.96, 76.12, 67.74},
        {10, "in", 48.52, 76.46, 68.27},
    };
    return rows;
}

const std::vector<FeatureCountRef>& feature_node_counts() {
    static const std::vector<FeatureCountRef> rows = {
        {9, 965635, 92.1},
        {20, 947341, 90.3},
        {31, 919220, 87.7},
    };
    return rows;
}

const std::vector<GroupLossRef>& scaling_losses() {
    static const std::vector<GroupLossRef> rows = {
        {"CF", 1.90, 1.64, 0.26},
        {"FF", 2.12, 1.87, 0.25},
        {"FC", 4.88, 4.27, 0.61},
        {"CC", 3.69, 3.08, 0.61},
    };
    return rows;
}

const GroupLossRef* scaling_loss(std::string_view group) {
    const auto& rows = scaling_losses();
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const GroupLossRef& r) { return group == r.group; });
    return it == rows.end() ? nullptr : &*it;
}

const std::vector<LambdaPreset>& lambda_presets() {
    static const std::vector<LambdaPreset> rows = {
        {"early", 3000, 10.0},
        {"intermediate", 50000, 4.0},
        {"late", 130000, 2.5},
    };
    return rows;
}

}  // namespace ftlab::ref
