/** Pure HTML-string renderers; the DOM layer only swaps innerHTML.
 * Keeping these pure makes them testable without a browser. */

import { Question, Relation, SchemaCatalog } from "./api.js";
import { Attempt } from "./history.js";
import { FeedbackView } from "./store.js";

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderQuestionList(
  questions: Question[],
  selectedId: string | null,
): string {
  const items = questions
    .map((q) => {
      const cls = q.id === selectedId ? ' class="selected"' : "";
      return (
        `<li${cls} data-question="${esc(q.id)}">` +
        `<span class="qid">${esc(q.id)}</span> ` +
        `<span class="qtext">${esc(q.text)}</span> ` +
        `<span class="qmarks">${q.max_marks} marks</span></li>`
      );
    })
    .join("");
  return `<ul class="questions">${items}</ul>`;
}

function renderRelation(rel: Relation): string {
  const pk = new Set(rel.primary_key);
  const attrs = rel.attributes
    .map((a) => {
      const keyMark = pk.has(a.name) ? " 🔑" : "";
      const nullMark = a.nullable ? "" : " not null";
      return `<li><code>${esc(a.name)}</code> ${esc(a.type)}${nullMark}${keyMark}</li>`;
    })
    .join("");
  const fks = rel.foreign_keys
    .map(
      (fk) =>
        `<li class="fk">${fk.attributes.map(esc).join(", ")} &rarr; ` +
        `${esc(fk.references)}(${fk.ref_attributes.map(esc).join(", ")})</li>`,
    )
    .join("");
  return (
    `<details class="relation"><summary>${esc(rel.name)}</summary>` +
    `<ul class="attrs">${attrs}</ul>` +
    (fks ? `<ul class="fks">${fks}</ul>` : "") +
    `</details>`
  );
}

export function renderSchema(schema: SchemaCatalog): string {
  return schema.relations.map(renderRelation).join("");
}

export function renderFeedback(view: FeedbackView): string {
  switch (view.kind) {
    case "idle":
      return "";
    case "pending":
      return `<p class="pending">grading&hellip;</p>`;
    case "equivalent":
      return `<div class="banner equivalent">Equivalent — full marks</div>`;
    case "correct-only":
      return `<div class="banner incorrect">Not equivalent yet — keep trying</div>`;
    case "edits": {
      const marks =
        view.marksFraction !== null
          ? `<p class="marks">marks: ${(view.marksFraction * 100).toFixed(0)}%</p>`
          : "";
      const steps = view.edits
        .map(
          (e, i) =>
            `<li class="edit" data-hint="${esc(e)}">` +
            `<span class="step">step ${i + 1}:</span> ${esc(e)} ` +
            `<button class="apply" data-hint="${esc(e)}">apply</button></li>`,
        )
        .join("");
      return (
        `<div class="banner incorrect">Not equivalent — suggested fixes</div>` +
        marks +
        `<ol class="edits">${steps}</ol>`
      );
    }
    case "syntax-error": {
      const anchor =
        view.line !== null
          ? ` <span class="anchor">(line ${view.line}, column ${view.column ?? "?"})</span>`
          : "";
      return `<div class="banner syntax">Syntax error${anchor}</div><pre class="diag">${esc(view.diagnostics)}</pre>`;
    }
    case "error":
      return `<div class="banner error">Request failed (${view.status})</div><pre class="diag">${esc(view.diagnostics)}</pre>`;
  }
}

export function renderHistory(attempts: Attempt[]): string {
  if (attempts.length === 0) return `<p class="empty">no attempts yet</p>`;
  const rows = attempts
    .map((a, i) => {
      const marks =
        a.marksFraction !== null ? `${(a.marksFraction * 100).toFixed(0)}%` : "—";
      return (
        `<li><span class="n">#${i + 1}</span> ` +
        `<code>${esc(a.sql)}</code> ` +
        `<span class="outcome">${esc(a.outcome)}</span> ` +
        `<span class="marks">${marks}</span></li>`
      );
    })
    .join("");
  return `<ul class="history">${rows}</ul>`;
}

/** Line-number gutter matching the textarea contents. */
export function renderGutter(sql: string): string {
  const lines = Math.max(1, sql.split("\n").length);
  return Array.from({ length: lines }, (_, i) => `${i + 1}`).join("\n");
}
