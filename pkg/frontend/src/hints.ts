/** Turn a rendered edit hint back into SQL where that is mechanical.
 *
 * Only "add the condition <expr>" hints are safe to apply automatically:
 * the expression is complete and conjunction placement is unambiguous.
 * Everything else returns null and the student edits by hand.
 */

const ADD_CONDITION = /^add the condition (.+)$/i;

export function applyHint(sql: string, hint: string): string | null {
  const m = ADD_CONDITION.exec(hint.trim());
  if (!m) return null;
  const cond = m[1];
  const base = sql.replace(/;\s*$/, "").trimEnd();
  // Append after an existing WHERE as a conjunct, otherwise insert a
  // WHERE before any trailing GROUP BY / ORDER BY clause.
  if (/\bwhere\b/i.test(base)) {
    return `${base} AND ${cond}`;
  }
  const tail = /\b(group\s+by|order\s+by|having)\b/i.exec(base);
  if (tail) {
    const i = tail.index;
    return `${base.slice(0, i)}WHERE ${cond} ${base.slice(i)}`;
  }
  return `${base} WHERE ${cond}`;
}
