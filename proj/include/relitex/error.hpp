/*
 * Copyright (C) 2026 The Relitex Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RELITEX_ERROR_HPP
#define RELITEX_ERROR_HPP

#include <stdexcept>
#include <string>

namespace relitex {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class MeshError : public Error {
public:
    using Error::Error;
};

class ImageError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

enum class BackendErrorKind {
    ConnectionRefused,
    Timeout,
    Schema,
    Server,
    Unreachable,
};

const char* to_string(BackendErrorKind kind);

class BackendError : public Error {
public:
    BackendError(BackendErrorKind kind, const std::string& message)
            : Error(std::string(to_string(kind)) + ": " + message), mKind(kind) {}

    BackendErrorKind kind() const noexcept { return mKind; }

private:
    BackendErrorKind mKind;
};

} // namespace relitex

#endif // RELITEX_ERROR_HPP
