/** Typed client for the grading service. The UI never grades locally;
 * everything comes from these three endpoints. */

export interface Question {
  id: string;
  text: string;
  max_marks: number;
  feedback: "all" | "first" | "correct-only";
}

export interface Attribute {
  name: string;
  type: string;
  nullable: boolean;
}

export interface ForeignKey {
  attributes: string[];
  references: string;
  ref_attributes: string[];
}

export interface Relation {
  name: string;
  attributes: Attribute[];
  primary_key: string[];
  unique_keys: string[][];
  foreign_keys: ForeignKey[];
}

export interface SchemaCatalog {
  relations: Relation[];
}

export interface Feedback {
  outcome: string;
  equivalent: boolean;
  marks_fraction?: number;
  edits?: string[];
}

export interface Diagnostics {
  diagnostics: string;
  line?: number;
  column?: number;
}

/** Raised for non-2xx responses; carries the service's diagnostics. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: Diagnostics,
  ) {
    super(detail.diagnostics);
  }
}

const PREFIX = "/api/v1";

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) {
    throw new ApiError(resp.status, await errorDetail(resp));
  }
  return (await resp.json()) as T;
}

async function errorDetail(resp: Response): Promise<Diagnostics> {
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "object") {
      return body.detail as Diagnostics;
    }
    return { diagnostics: String(body?.detail ?? resp.statusText) };
  } catch {
    return { diagnostics: resp.statusText };
  }
}

export class ApiClient {
  constructor(private readonly baseUrl = "") {}

  async questions(): Promise<Question[]> {
    const body = await getJson<{ questions: Question[] }>(
      `${this.baseUrl}${PREFIX}/questions`,
    );
    return body.questions;
  }

  schema(): Promise<SchemaCatalog> {
    return getJson<SchemaCatalog>(`${this.baseUrl}${PREFIX}/schema`);
  }

  async feedback(questionId: string, sql: string): Promise<Feedback> {
    const resp = await fetch(`${this.baseUrl}${PREFIX}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question_id: questionId, sql }),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorDetail(resp));
    }
    return (await resp.json()) as Feedback;
  }
}
