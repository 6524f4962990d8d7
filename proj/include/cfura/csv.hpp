// SPDX-License-Identifier: Apache-2.0
//
// cfura - joint message detection and channel estimation for cell-free uRA
// Copyright (C) 2026 cfura contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CFURA_CSV_HPP
#define CFURA_CSV_HPP

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace cfura
{
    inline constexpr int kCsvSchemaVersion = 1;

    std::string csv_cell(double v);
    std::string csv_cell(long long v);
    inline std::string csv_cell(int v) { return csv_cell(static_cast<long long>(v)); }
    inline std::string csv_cell(long v) { return csv_cell(static_cast<long long>(v)); }
    // Undefined values are written as "nan".
    std::string csv_cell(const std::optional<double> &v);

    class CsvWriter
    {
    public:
        CsvWriter(const std::string &path, const std::vector<std::string> &columns);

        void row(const std::vector<std::string> &cells);
        void close();

    private:
        std::string path_;
        std::size_t width_ = 0;
        std::ofstream out_;
    };

    struct CsvTable
    {
        std::vector<std::string> columns;
        std::vector<std::vector<std::string>> rows;

        int column(const std::string &name) const; // -1 when absent
    };

    CsvTable read_csv(const std::string &path);
}

#endif
