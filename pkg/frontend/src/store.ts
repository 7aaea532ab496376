/** Application state: selected question, submission lifecycle, feedback.
 * One in-flight request per question; submit is refused while pending.
 * All grading happens server-side. */

import { ApiClient, ApiError, Feedback, Question, SchemaCatalog } from "./api.js";
import { Attempt, AttemptHistory } from "./history.js";

export type FeedbackView =
  | { kind: "idle" }
  | { kind: "pending" }
  | { kind: "equivalent"; marksFraction: number | null }
  | { kind: "edits"; outcome: string; marksFraction: number | null; edits: string[] }
  | { kind: "correct-only"; outcome: string }
  | { kind: "syntax-error"; diagnostics: string; line: number | null; column: number | null }
  | { kind: "error"; status: number; diagnostics: string };

export class Store {
  questions: Question[] = [];
  schema: SchemaCatalog = { relations: [] };
  selected: Question | null = null;
  sql = "";
  view: FeedbackView = { kind: "idle" };
  private pending = false;
  private listeners: Array<() => void> = [];

  constructor(
    private readonly api: ApiClient,
    readonly history: AttemptHistory,
  ) {}

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  get submitDisabled(): boolean {
    return this.pending || this.selected === null;
  }

  async load(): Promise<void> {
    [this.questions, this.schema] = await Promise.all([
      this.api.questions(),
      this.api.schema(),
    ]);
    if (this.questions.length > 0) this.selected = this.questions[0];
    this.notify();
  }

  select(questionId: string): void {
    const q = this.questions.find((q) => q.id === questionId) ?? null;
    if (q === this.selected) return;
    this.selected = q;
    this.sql = "";
    this.view = { kind: "idle" };
    this.notify();
  }

  setSql(sql: string): void {
    this.sql = sql;
  }

  attempts(): Attempt[] {
    return this.selected ? this.history.list(this.selected.id) : [];
  }

  /** Returns false when a request is already pending or nothing is selected. */
  async submit(): Promise<boolean> {
    if (this.submitDisabled) return false;
    const q = this.selected!;
    this.pending = true;
    this.view = { kind: "pending" };
    this.notify();
    try {
      const fb = await this.api.feedback(q.id, this.sql);
      this.view = this.interpret(fb);
      this.history.record(q.id, {
        sql: this.sql,
        outcome: fb.outcome,
        marksFraction: fb.marks_fraction ?? null,
        at: new Date().toISOString(),
      });
    } catch (err) {
      this.view = this.interpretError(err);
    } finally {
      this.pending = false;
      this.notify();
    }
    return true;
  }

  private interpret(fb: Feedback): FeedbackView {
    if (fb.equivalent) {
      return { kind: "equivalent", marksFraction: fb.marks_fraction ?? null };
    }
    if (fb.edits === undefined) {
      return { kind: "correct-only", outcome: fb.outcome };
    }
    return {
      kind: "edits",
      outcome: fb.outcome,
      marksFraction: fb.marks_fraction ?? null,
      edits: fb.edits,
    };
  }

  private interpretError(err: unknown): FeedbackView {
    if (err instanceof ApiError) {
      if (err.status === 422) {
        return {
          kind: "syntax-error",
          diagnostics: err.detail.diagnostics,
          line: err.detail.line ?? null,
          column: err.detail.column ?? null,
        };
      }
      return { kind: "error", status: err.status, diagnostics: err.detail.diagnostics };
    }
    return { kind: "error", status: 0, diagnostics: String(err) };
  }
}
