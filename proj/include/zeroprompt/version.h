// Copyright 2026 ZeroPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.

#ifndef ZEROPROMPT_VERSION_H_
#define ZEROPROMPT_VERSION_H_

namespace zeroprompt {

constexpr const char* kVersion = "0.1.0";

}  // namespace zeroprompt

#endif  // ZEROPROMPT_VERSION_H_
