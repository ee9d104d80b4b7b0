#include <string.h>

/**
 * Append len bytes of data to the buffer. Grows the storage when needed.
 */
int buffer_append(struct buffer *b, const void *data, size_t len)
{
    return 0;
}

/** Reset the buffer to an empty state. */
void buffer_reset(struct buffer *b)
{
}

/**
 * Look up a key in the hash table (open addressing). Returns NULL when absent.
 */
void *hash_lookup(struct table *t, const char *key)
{
    return 0;
}

/**
 * Insert a key value pair into the table?
 */
int hash_insert(struct table *t, const char *key, void *value)
{
    return 0;
}

/**
 * Reverse the order of elements in the list
 */
struct node *list_reverse(struct node *head)
{
    return head;
}

/**
 * Update a running crc32 checksum with new data. Computes X. Returns Y.
 */
unsigned crc32_update(unsigned crc, const unsigned char *p, size_t n)
{
    return crc;
}

/**
 * Remove leading and trailing whitespace from a string.
 */
char *str_trim(char *s)
{
    return s;
}

/**
 * Flush pending log records to disk.
 */
void
log_flush(void)
{
}
