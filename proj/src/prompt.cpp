#include "llmvs/prompt.hpp"

#include "llmvs/dataset.hpp"
#include "llmvs/error.hpp"

#include <sstream>
#include <vector>

namespace llmvs {

WindowSpec build_window(std::size_t t, std::size_t w, std::size_t T) {
  if (w < 3 || w % 2 == 0)
    throw PreconditionError("window size must be odd and >= 3, got " + std::to_string(w));
  if (t >= T)
    throw PreconditionError("center frame " + std::to_string(t) + " outside video of length " +
                            std::to_string(T));
  const std::size_t half = w / 2;
  WindowSpec s;
  s.center = t;
  s.window_size = w;
  s.lo = t >= half ? t - half : 0;
  s.hi = std::min(T - 1, t + half);
  s.center_position = t - s.lo + 1;
  return s;
}

namespace {

constexpr const char* kInstruction =
    "You are an intelligent chatbot designed to critically assess the importance of a central "
    "frame within a specific context. Given a set of consecutive frame descriptions from a video "
    "with narrative changes, your task is to assign an importance score to the central frame "
    "based on its narrative contribution. Evaluate the frame using the following criteria:\n"
    "------\n"
    "##INSTRUCTIONS:\n"
    "1. **Narrative Significance**: Assign a high score if the frame captures pivotal plot "
    "developments, character milestones, or key conflicts/resolutions. This measures the frame's "
    "impact on the overall story.\n"
    "2. **Uniqueness and Novelty**: Score highly if the frame introduces new elements or "
    "showcases significant alterations in the story or setting. This reflects the frame's "
    "contribution to refreshing the narrative.\n"
    "3. **Action and Dynamics**: Give a high score if the frame depicts crucial actions, events, "
    "or is characterized by high energy or movement. This assesses the intensity and momentum "
    "conveyed by the frame.\n"
    "\n"
    "##NOTE: Keep in mind that the descriptions provided may not fully capture the essence of the "
    "corresponding image. Therefore, it's crucial to consider the overall context when "
    "determining the importance of the central frame.\n"
    "Assess its significance not only based on the explicit details given but also in the context "
    "of the narrative progression and thematic development.";

constexpr const char* kQuery =
    "Please evaluate the importance score of the central frame #{c} in following {n} frames. Be "
    "stingy with scores.\n"
    "------\n"
    "{captions}\n"
    "------\n"
    "Provide your score where the score is an integer value between 0 and 10, with 10 indicating "
    "the highest important frame in a context.\n"
    "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANARION. Only provide the Python dictionary "
    "string.";

constexpr const char* kExample1 =
    "Please evaluate the importance score of the central frame #7 in following 13 frames. Be "
    "stingy with scores.\n"
    "------\n"
    "#1: A man is standing on a ramp next to a car.\n"
    "#2: A man is standing on a flatbed truck.\n"
    "#3: A man is standing on a ramp next to a car.\n"
    "#4: A man is standing on a ramp with a blue car on it.\n"
    "#5: A man is standing in front of a crowd of people.\n"
    "#6: A blue shirt with a white collar.\n"
    "#7: A close up of a piece of cloth.\n"
    "#8: A purple wall with a blue stripe.\n"
    "#9: A person's arm with a white shirt on.\n"
    "#10: A person is wearing a purple shirt.\n"
    "#11: A man is holding a rock in his hand.\n"
    "#12: A man is sitting on a chair and holding a car hood.\n"
    "#13: A man is holding a car door open while another man is holding a piece of paper.\n"
    "------\n"
    "Provide your score where the score is an integer value between 0 and 10, with 10 indicating "
    "the highest important frame in a context.\n"
    "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANARION. Only provide the Python dictionary "
    "string.";

constexpr const char* kExample2 =
    "Please evaluate the importance score of the central frame #4 in following 7 frames. Be "
    "stingy with scores.\n"
    "------\n"
    "#1: A group of people are standing on a roadway near a railroad crossing.\n"
    "#2: A group of people are standing on a street corner.\n"
    "#3: A group of people are standing on a ramp in the middle of a street.\n"
    "#4: A group of people are standing on a road that is blocked off.\n"
    "#5: A group of people are standing around a car that is stuck in a puddle.\n"
    "#6: A group of people are standing around a car that is on its side.\n"
    "#7: A group of people are standing around a car that is on its side.\n"
    "------\n"
    "Provide your score where the score is an integer value between 0 and 10, with 10 indicating "
    "the highest important frame in a context.\n"
    "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANARION. Only provide the Python dictionary "
    "string.";

constexpr const char* kExample3 =
    "Please evaluate the importance score of the central frame #6 in following 11 frames. Be "
    "stingy with scores.\n"
    "------\n"
    "#1: A group of people are standing in the middle of a street.\n"
    "#2: A group of people are standing in front of a traffic light.\n"
    "#3: A group of people are standing on a roadway near a railroad crossing.\n"
    "#4: A man is standing on a railroad crossing.\n"
    "#5: A man is standing on a railroad crossing.\n"
    "#6: A car is driving on a street with a red light.\n"
    "#7: A car is driving on a road with a man standing next to a railroad crossing.\n"
    "#8: A man is pushing a large metal object in front of a train.\n"
    "#9: A man is sitting on a couch in the middle of a street.\n"
    "#10: A car is driving through a red light.\n"
    "#11: A man is standing on a railroad crossing.\n"
    "------\n"
    "Provide your score where the score is an integer value between 0 and 10, with 10 indicating "
    "the highest important frame in a context.\n"
    "# DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANARION. Only provide the Python dictionary "
    "string.";

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

void PromptTemplate::validate() const {
  if (instruction.empty()) throw TemplateError("template instruction section is empty");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].question.empty() || examples[i].answer.empty())
      throw TemplateError("template example " + std::to_string(i + 1) + " is incomplete");
  }
  for (const char* ph : {"{n}", "{c}", "{captions}"})
    if (query.find(ph) == std::string::npos)
      throw TemplateError(std::string("template query is missing placeholder ") + ph);
}

const PromptTemplate& default_template() {
  static const PromptTemplate t{
      kInstruction,
      {PromptExample{kExample1, "score: 1"}, PromptExample{kExample2, "score: 5"},
       PromptExample{kExample3, "score: 9"}},
      kQuery};
  return t;
}

PromptTemplate parse_template(const std::string& text) {
  enum class Section { none, instruction, example, answer, query };
  std::vector<std::pair<Section, std::vector<std::string>>> sections;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Section marker = Section::none;
    if (line == "[[INSTRUCTION]]") marker = Section::instruction;
    else if (line == "[[EXAMPLE]]") marker = Section::example;
    else if (line == "[[ANSWER]]") marker = Section::answer;
    else if (line == "[[QUERY]]") marker = Section::query;
    if (marker != Section::none) {
      sections.push_back({marker, {}});
    } else if (!sections.empty()) {
      sections.back().second.push_back(line);
    } else if (!line.empty()) {
      throw TemplateError("text before the first section marker");
    }
  }
  auto body = [](std::vector<std::string> lines) {
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i) out += '\n';
      out += lines[i];
    }
    return out;
  };
  const std::vector<Section> expected = {Section::instruction, Section::example, Section::answer,
                                         Section::example,     Section::answer,  Section::example,
                                         Section::answer,      Section::query};
  if (sections.size() != expected.size())
    throw TemplateError("template needs INSTRUCTION, three EXAMPLE/ANSWER pairs and QUERY");
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (sections[i].first != expected[i]) throw TemplateError("template sections out of order");

  PromptTemplate t;
  t.instruction = body(sections[0].second);
  for (std::size_t e = 0; e < 3; ++e) {
    t.examples[e].question = body(sections[1 + 2 * e].second);
    t.examples[e].answer = body(sections[2 + 2 * e].second);
  }
  t.query = body(sections[7].second);
  t.validate();
  return t;
}

PromptTemplate load_template(const std::filesystem::path& path) { return parse_template(read_file(path)); }

std::string serialize_template(const PromptTemplate& t) {
  std::string out = "[[INSTRUCTION]]\n" + t.instruction + "\n";
  for (const auto& e : t.examples) out += "[[EXAMPLE]]\n" + e.question + "\n[[ANSWER]]\n" + e.answer + "\n";
  out += "[[QUERY]]\n" + t.query + "\n";
  return out;
}

std::string render_query(std::span<const std::string> window_captions, std::size_t center_position,
                         const PromptTemplate& tmpl) {
  std::string lines;
  for (std::size_t i = 0; i < window_captions.size(); ++i) {
    if (i) lines += '\n';
    lines += "#" + std::to_string(i + 1) + ": " + window_captions[i];
  }
  std::string q = tmpl.query;
  replace_all(q, "{n}", std::to_string(window_captions.size()));
  replace_all(q, "{c}", std::to_string(center_position));
  replace_all(q, "{captions}", lines);
  return q;
}

std::string render_prefix(const PromptTemplate& tmpl) {
  std::string out = tmpl.instruction + "\n\n";
  for (const auto& e : tmpl.examples) out += e.question + "\nAnswer: " + e.answer + "\n\n";
  return out;
}

WindowPrompt render_prompt(const CaptionSequence& captions, const WindowSpec& spec,
                           const PromptTemplate& tmpl) {
  tmpl.validate();
  if (spec.hi >= captions.size() || spec.lo > spec.hi)
    throw PreconditionError("captions do not cover window [" + std::to_string(spec.lo) + ", " +
                            std::to_string(spec.hi) + "]");
  const std::span<const std::string> window(captions.captions.data() + spec.lo, spec.length());
  WindowPrompt p;
  p.window = spec;
  p.text = render_prefix(tmpl);
  p.query_span.begin = p.text.size();
  p.text += render_query(window, spec.center_position, tmpl);
  p.query_span.end = p.text.size();
  return p;
}

}  // namespace llmvs
