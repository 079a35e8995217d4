#pragma once

namespace disco::prompt_text {

struct ListingEntry {
  const char* name;
  const char* code;
  double fitness;
};

// System prompt = head + example code + tail.
extern const char* const kSystemHead;
extern const char* const kSystemExample;
extern const char* const kSystemTail;

// First user message = head + entries joined by ",\n" + tail.
extern const char* const kUserHead;
extern const char* const kUserTail;

// The four reference objectives and the fitnesses reported for them.
extern const ListingEntry kListings[4];

}  // namespace disco::prompt_text
