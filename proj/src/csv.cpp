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

#include "cfura/csv.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cfura/format.hpp"

namespace cfura
{
    std::string csv_cell(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        return format_double(v);
    }

    std::string csv_cell(long long v)
    {
        return std::to_string(v);
    }

    std::string csv_cell(const std::optional<double> &v)
    {
        return v ? csv_cell(*v) : std::string("nan");
    }

    CsvWriter::CsvWriter(const std::string &path, const std::vector<std::string> &columns)
        : path_(path), width_(columns.size()), out_(path, std::ios::binary | std::ios::trunc)
    {
        if (!out_)
            throw std::runtime_error("cannot open '" + path + "' for writing");
        row(columns);
    }

    void CsvWriter::row(const std::vector<std::string> &cells)
    {
        if (cells.size() != width_)
            throw std::logic_error("csv row width differs from the header in '" + path_ + "'");
        for (std::size_t i = 0; i < cells.size(); ++i)
        {
            if (i)
                out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        if (!out_)
            throw std::runtime_error("write failed on '" + path_ + "'");
    }

    void CsvWriter::close()
    {
        out_.close();
        if (out_.fail())
            throw std::runtime_error("closing '" + path_ + "' failed");
    }

    int CsvTable::column(const std::string &name) const
    {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name)
                return static_cast<int>(i);
        return -1;
    }

    CsvTable read_csv(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open '" + path + "'");
        CsvTable t;
        std::string line;
        bool header = true;
        while (std::getline(in, line))
        {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string c;
            while (std::getline(ss, c, ','))
                cells.push_back(c);
            if (line.back() == ',')
                cells.emplace_back();
            if (header)
            {
                t.columns = std::move(cells);
                header = false;
            }
            else
            {
                if (cells.size() != t.columns.size())
                    throw std::runtime_error("'" + path + "': row width differs from the header");
                t.rows.push_back(std::move(cells));
            }
        }
        if (header)
            throw std::runtime_error("'" + path + "' is empty");
        return t;
    }
}
