i = 0
skipped = 0
while i < 6:
    i += 1
    if i % 3:
        skipped += 1
        continue
    print(i)
print(skipped)
