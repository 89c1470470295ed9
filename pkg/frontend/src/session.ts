// Per-tab history of answered queries. Append-only: nothing edits or
// removes an entry once the API has answered.

export interface HistoryEntry {
  question: string;
  pipeline: string;
  decision: string;
  evidence: string;
  at: string;
}

export class QuerySession {
  private history: HistoryEntry[] = [];

  add(entry: HistoryEntry): void {
    this.history.push({ ...entry });
  }

  entries(): HistoryEntry[] {
    return this.history.slice();
  }

  get length(): number {
    return this.history.length;
  }
}
