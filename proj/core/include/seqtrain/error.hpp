// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_ERROR_HPP
#define SEQTRAIN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace seqtrain {

// Base class for all toolkit errors so callers can catch one type at the CLI
// boundary while tests assert on the specific subclasses.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputTooShort : Error { using Error::Error; };
struct InvalidWarp : Error { using Error::Error; };
struct InvalidMode : Error { using Error::Error; };
struct InvalidRate : Error { using Error::Error; };
struct ForbiddenConfiguration : Error { using Error::Error; };
struct WrongLocation : Error { using Error::Error; };
struct InvalidArchitecture : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct CacheMismatch : Error { using Error::Error; };
struct InfeasibleAlignment : Error { using Error::Error; };
struct NonFiniteGradient : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace seqtrain

#endif  // SEQTRAIN_ERROR_HPP
