/** Per-question attempt history, stored client-side only (localStorage)
 * so it survives reloads. Never sent to the server. */

export interface Attempt {
  sql: string;
  outcome: string;
  marksFraction: number | null;
  at: string; // ISO timestamp
}

const KEY_PREFIX = "sqlgrade.history.";

export class AttemptHistory {
  constructor(private readonly storage: Storage) {}

  private key(questionId: string): string {
    return KEY_PREFIX + questionId;
  }

  list(questionId: string): Attempt[] {
    const raw = this.storage.getItem(this.key(questionId));
    if (!raw) return [];
    try {
      const parsed = JSON.parse(raw);
      return Array.isArray(parsed) ? (parsed as Attempt[]) : [];
    } catch {
      return [];
    }
  }

  record(questionId: string, attempt: Attempt): void {
    const all = this.list(questionId);
    all.push(attempt);
    this.storage.setItem(this.key(questionId), JSON.stringify(all));
  }

  clear(questionId: string): void {
    this.storage.removeItem(this.key(questionId));
  }
}
