// SPDX-License-Identifier: Apache-2.0
//
// leoris: position error bounds for LEO satellite and RIS aided localization
// Copyright (C) 2026 The leoris authors
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

#ifndef LEORIS_ERROR_HPP
#define LEORIS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace leoris
{
    // Base of every exception thrown by the library.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class DegenerateGeometry : public Error
    {
    public:
        using Error::Error;
    };

    class InvalidInput : public Error
    {
    public:
        using Error::Error;
    };

    class InvalidAltitude : public InvalidInput
    {
    public:
        using InvalidInput::InvalidInput;
    };

    class InvalidMask : public InvalidInput
    {
    public:
        using InvalidInput::InvalidInput;
    };

    class MissingBuildingClass : public InvalidInput
    {
    public:
        using InvalidInput::InvalidInput;
    };

    class BranchUnsupported : public Error
    {
    public:
        using Error::Error;
    };

    class ScenarioInvalid : public Error
    {
    public:
        using Error::Error;
    };

    class NoisePowerZero : public Error
    {
    public:
        using Error::Error;
    };

    class ParseError : public Error
    {
    public:
        using Error::Error;
    };

    // Carries the JSON path of the offending field, e.g. "ris_panels[0].epsilon".
    class ValidationError : public Error
    {
    public:
        ValidationError(std::string field, const std::string &what)
            : Error(field + ": " + what), field_(std::move(field)) {}

        const std::string &field() const noexcept { return field_; }

    private:
        std::string field_;
    };
}

#endif
