// PDDL syntax highlighting: a single-pass tokenizer producing typed
// spans plus bracket pairing, rendered as an HTML overlay behind the
// editor textarea. Unpaired brackets are flagged so the stylesheet can
// underline them.

export type TokenType =
  | 'comment'
  | 'keyword'
  | 'variable'
  | 'form'
  | 'number'
  | 'paren'
  | 'name'
  | 'space';

export interface Token {
  type: TokenType;
  /** Offset of the first character in the source text. */
  start: number;
  /** Offset one past the last character. */
  end: number;
  /** Parens only: nesting depth, outermost pair is 0. */
  depth?: number;
  /** Parens only: offset of the partner bracket, -1 when unpaired. */
  match?: number;
}

// Structural words that read as operators rather than names.
const FORMS = new Set(['define', 'and', 'or', 'not', 'when', 'exists', 'forall', '=']);

const WORD = /[^\s();]+/y;

export function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  const open: number[] = []; // indices into tokens of unpaired '('
  let pos = 0;
  while (pos < text.length) {
    const ch = text[pos];
    if (ch === ';') {
      let end = text.indexOf('\n', pos);
      if (end < 0) {
        end = text.length;
      }
      tokens.push({ type: 'comment', start: pos, end });
      pos = end;
    } else if (ch === '(') {
      tokens.push({ type: 'paren', start: pos, end: pos + 1, depth: open.length, match: -1 });
      open.push(tokens.length - 1);
      pos += 1;
    } else if (ch === ')') {
      const partner = open.pop();
      const token: Token = {
        type: 'paren',
        start: pos,
        end: pos + 1,
        depth: open.length,
        match: -1,
      };
      if (partner !== undefined) {
        token.match = tokens[partner].start;
        tokens[partner].match = pos;
      }
      tokens.push(token);
      pos += 1;
    } else if (ch === ' ' || ch === '\t' || ch === '\n' || ch === '\r') {
      let end = pos;
      while (end < text.length && ' \t\n\r'.includes(text[end])) {
        end += 1;
      }
      tokens.push({ type: 'space', start: pos, end });
      pos = end;
    } else {
      WORD.lastIndex = pos;
      const match = WORD.exec(text);
      const word = match ? match[0] : text[pos];
      const end = pos + word.length;
      tokens.push({ type: classify(word), start: pos, end });
      pos = end;
    }
  }
  return tokens;
}

function classify(word: string): TokenType {
  if (word.startsWith(':')) {
    return 'keyword';
  }
  if (word.startsWith('?')) {
    return 'variable';
  }
  if (FORMS.has(word.toLowerCase())) {
    return 'form';
  }
  if (/^-?\d+(\.\d+)?$/.test(word)) {
    return 'number';
  }
  return 'name';
}

/** Offsets of every bracket that has no partner. */
export function unpairedParens(tokens: Token[]): number[] {
  return tokens.filter((t) => t.type === 'paren' && t.match === -1).map((t) => t.start);
}

/**
 * The bracket pair the caret sits on, if any: a paren immediately left
 * of the caret wins, then one immediately right. Returns the offsets of
 * both brackets, or null.
 */
export function parenPairAt(tokens: Token[], caret: number): [number, number] | null {
  for (const at of [caret - 1, caret]) {
    const token = tokens.find((t) => t.type === 'paren' && t.start === at);
    if (token && token.match !== undefined && token.match >= 0) {
      return [token.start, token.match];
    }
  }
  return null;
}

const ESCAPES: Record<string, string> = {
  '&': '&amp;',
  '<': '&lt;',
  '>': '&gt;',
  '"': '&quot;',
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"]/g, (ch) => ESCAPES[ch]);
}

/**
 * Render the source as highlight markup: one span per token, classed
 * `tok-<type>`. Paired brackets additionally get a rotating depth class,
 * unpaired ones `tok-unpaired`, and the pair under `caret` (when given)
 * `tok-active`.
 */
export function toHtml(text: string, caret?: number): string {
  const tokens = tokenize(text);
  const active = caret === undefined ? null : parenPairAt(tokens, caret);
  const parts: string[] = [];
  for (const token of tokens) {
    const source = escapeHtml(text.slice(token.start, token.end));
    if (token.type === 'space') {
      parts.push(source);
      continue;
    }
    const classes = [`tok-${token.type}`];
    if (token.type === 'paren') {
      if (token.match === -1) {
        classes.push('tok-unpaired');
      } else {
        classes.push(`tok-depth-${(token.depth ?? 0) % 6}`);
      }
      if (active && (token.start === active[0] || token.start === active[1])) {
        classes.push('tok-active');
      }
    }
    parts.push(`<span class="${classes.join(' ')}">${source}</span>`);
  }
  return parts.join('');
}
